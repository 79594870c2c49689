import type {
  ErrorEnvelope,
  HealthResponse,
  PerformancesResponse,
  PieceSummary,
  PiecesResponse,
  QueryResponse,
} from "./types.js";

/** Minimal slice of the Fetch Response surface the client relies on. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<ResponseLike>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }

  /** Out-of-vocabulary tokens reported by an unencodable-query error. */
  get oovTokens(): string[] {
    const raw = this.details["oov_tokens"];
    return Array.isArray(raw) ? raw.map(String) : [];
  }
}

/**
 * Typed client for the espresso service. The base URL is the single piece
 * of configuration; everything else is fixed by the API contract.
 */
export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: ResponseLike;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network_error", "could not reach the service", {
        cause: String(err),
      });
    }
    if (!response.ok) {
      // Every error body is expected to carry the {code, message, details}
      // envelope; fall back to the bare status when it does not parse.
      let envelope: Partial<ErrorEnvelope> = {};
      try {
        envelope = (await response.json()) as Partial<ErrorEnvelope>;
      } catch {
        envelope = {};
      }
      throw new ApiError(
        response.status,
        envelope.code ?? "http_error",
        envelope.message ?? `request failed with status ${response.status}`,
        envelope.details ?? {},
      );
    }
    return (await response.json()) as T;
  }

  async health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  async pieces(): Promise<PieceSummary[]> {
    const doc = await this.request<PiecesResponse>("/pieces");
    return doc.pieces;
  }

  async performances(pieceId: string): Promise<PerformancesResponse> {
    return this.request<PerformancesResponse>(
      `/pieces/${encodeURIComponent(pieceId)}/performances`,
    );
  }

  async query(pieceId: string, text: string): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ piece_id: pieceId, text }),
    });
  }
}
