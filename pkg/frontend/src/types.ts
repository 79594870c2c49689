/**
 * Response document types for the espresso HTTP API.
 *
 * These mirror the service's JSON bodies exactly; the client performs no
 * reshaping beyond unwrapping top-level envelopes.
 */

export const FEATURE_NAMES = [
  "melodiousness",
  "articulation",
  "rhythm_stability",
  "rhythm_complexity",
  "dissonance",
  "tonal_stability",
  "minorness",
  "onset_density",
] as const;

export type FeatureName = (typeof FEATURE_NAMES)[number];

export type FeatureProfile = Record<FeatureName, number>;

export interface PieceSummary {
  piece_id: string;
  title: string;
  performance_count: number;
}

export interface PiecesResponse {
  pieces: PieceSummary[];
}

export interface PerformanceRef {
  performance_id: string;
  artist_label: string;
}

export interface PerformancesResponse {
  piece_id: string;
  title: string;
  performances: PerformanceRef[];
}

/** Signed offsets from the piece mean, one pair per feature. */
export interface DeviationPair {
  predicted: number;
  performance: number;
}

export interface RankedResult {
  performance_id: string;
  artist_label: string;
  score: number;
  rank: number;
  predicted_profile: FeatureProfile;
  performance_profile: FeatureProfile;
  deviations: Record<FeatureName, DeviationPair>;
}

export interface QueryWarnings {
  oov_tokens: string[];
  notes: string[];
}

export interface QueryResponse {
  piece_id: string;
  query: string;
  results: RankedResult[];
  warnings: QueryWarnings;
}

export interface HealthResponse {
  status: string;
  version: string;
  model_fingerprint: string;
}

/** Error body shared by every non-2xx service response. */
export interface ErrorEnvelope {
  code: string;
  message: string;
  details: Record<string, unknown>;
}
