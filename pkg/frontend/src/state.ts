import type { PieceSummary, QueryResponse } from "./types.js";

export type RequestStatus = "idle" | "loading" | "ready" | "error";

/**
 * The whole UI state in one record. The invariant that matters: `result`
 * always corresponds to the query and piece the user most recently
 * submitted; out-of-order responses are discarded before they get here.
 */
export interface UiState {
  pieces: PieceSummary[];
  selectedPieceId: string | null;
  queryText: string;
  result: QueryResponse | null;
  oovTokens: string[];
  status: RequestStatus;
  error: string | null;
}

export function initialState(): UiState {
  return {
    pieces: [],
    selectedPieceId: null,
    queryText: "",
    result: null,
    oovTokens: [],
    status: "idle",
    error: null,
  };
}

/**
 * Monotonic ticket dispenser for in-flight requests. A response may only
 * be applied if its ticket is still the latest one issued; anything else
 * is stale and must be dropped, never rendered.
 */
export class RequestSequencer {
  private issued = 0;

  next(): number {
    this.issued += 1;
    return this.issued;
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.issued;
  }

  /** Invalidate all outstanding tickets without issuing a new one. */
  invalidate(): void {
    this.issued += 1;
  }
}
