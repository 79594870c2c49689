import type { FetchLike, ResponseLike } from "../src/api.js";
import { FEATURE_NAMES } from "../src/types.js";
import type {
  DeviationPair,
  FeatureName,
  FeatureProfile,
  PieceSummary,
  QueryResponse,
  RankedResult,
} from "../src/types.js";

export function jsonResponse(body: unknown, status = 200): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  };
}

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export type RouteHandler = (
  init?: RequestInit,
) => Promise<ResponseLike> | ResponseLike;

/**
 * Fixture-backed stand-in for the service: routes keyed by
 * "METHOD /path", relative to the base URL the client was given.
 */
export class FixtureService {
  readonly calls: string[] = [];
  private readonly routes = new Map<string, RouteHandler>();

  constructor(private readonly base = "http://svc") {}

  on(method: string, path: string, handler: RouteHandler): void {
    this.routes.set(`${method} ${path}`, handler);
  }

  get baseUrl(): string {
    return this.base;
  }

  get fetch(): FetchLike {
    return async (input, init) => {
      const method = init?.method ?? "GET";
      const path = input.startsWith(this.base)
        ? input.slice(this.base.length)
        : input;
      const key = `${method} ${path}`;
      this.calls.push(key);
      const handler = this.routes.get(key);
      if (!handler) {
        throw new TypeError(`no route for ${key}`);
      }
      return handler(init);
    };
  }
}

export function pieceFixtures(count: number): PieceSummary[] {
  return Array.from({ length: count }, (_, i) => ({
    piece_id: `piece_${i}`,
    title: `Piece ${i}`,
    performance_count: 5,
  }));
}

export function profileOf(value: number): FeatureProfile {
  const profile = {} as FeatureProfile;
  for (const name of FEATURE_NAMES) profile[name] = value;
  return profile;
}

export function deviationsOf(
  predicted: number,
  performance: number,
): Record<FeatureName, DeviationPair> {
  const out = {} as Record<FeatureName, DeviationPair>;
  for (const name of FEATURE_NAMES) {
    out[name] = { predicted, performance };
  }
  return out;
}

export function rankedResult(
  rank: number,
  performanceId: string,
  artist: string,
  score: number,
): RankedResult {
  return {
    performance_id: performanceId,
    artist_label: artist,
    score,
    rank,
    predicted_profile: profileOf(0.5),
    performance_profile: profileOf(0.4),
    deviations: deviationsOf(0.3 * rank, -0.2 * rank),
  };
}

/** Five ranked results whose ids are deliberately not in lexical order,
 * so any client-side re-sorting would be visible. */
export function queryFixture(pieceId: string, text: string): QueryResponse {
  return {
    piece_id: pieceId,
    query: text,
    results: [
      rankedResult(1, `${pieceId}_v3`, "artist 3", 0.91),
      rankedResult(2, `${pieceId}_v0`, "artist 0", 0.72),
      rankedResult(3, `${pieceId}_v4`, "artist 4", 0.55),
      rankedResult(4, `${pieceId}_v1`, "artist 1", 0.31),
      rankedResult(5, `${pieceId}_v2`, "artist 2", -0.12),
    ],
    warnings: { oov_tokens: [], notes: [] },
  };
}

export async function flush(times = 4): Promise<void> {
  for (let i = 0; i < times; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
