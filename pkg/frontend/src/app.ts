import { ApiClient, ApiError } from "./api.js";
import { initialState, RequestSequencer } from "./state.js";
import type { UiState } from "./state.js";
import {
  renderInlineError,
  renderPerformances,
  renderPieceOptions,
  renderResults,
  renderWarnings,
} from "./render.js";

export interface AppOptions {
  /** Delay between a submit and the query actually firing. */
  debounceMs?: number;
}

export interface AppHandles {
  start(): Promise<void>;
  state: UiState;
  root: HTMLElement;
}

function messageOf(err: unknown): string {
  if (err instanceof ApiError) {
    return err.code === "network_error"
      ? "Could not reach the service."
      : err.message;
  }
  return String(err);
}

/**
 * Wire the whole single-page UI into `root`. All data comes from the
 * service; the client holds no ranking or scoring logic of its own.
 */
export function createApp(
  root: HTMLElement,
  client: ApiClient,
  options: AppOptions = {},
): AppHandles {
  const debounceMs = options.debounceMs ?? 250;
  const state = initialState();
  const sequencer = new RequestSequencer();
  let debounceTimer: ReturnType<typeof setTimeout> | null = null;

  root.innerHTML = "";
  root.className = "app";

  const banner = document.createElement("div");
  banner.className = "banner";
  banner.hidden = true;

  const picker = document.createElement("section");
  picker.className = "picker";
  const pickerLabel = document.createElement("label");
  pickerLabel.htmlFor = "piece-select";
  pickerLabel.textContent = "Piece";
  const select = document.createElement("select");
  select.id = "piece-select";
  const performers = document.createElement("div");
  performers.className = "performers";
  picker.append(pickerLabel, select, performers);

  const form = document.createElement("form");
  form.className = "query-form";
  const input = document.createElement("input");
  input.type = "text";
  input.id = "query-input";
  input.placeholder = "describe the performance, e.g. shy, magical, deep";
  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Rank performances";
  form.append(input, submit);

  const warnings = document.createElement("div");
  warnings.className = "warnings";
  const status = document.createElement("div");
  status.className = "status";
  const results = document.createElement("ol");
  results.className = "results";

  root.append(banner, picker, form, warnings, status, results);

  function showBanner(message: string, onRetry: (() => void) | null): void {
    banner.innerHTML = "";
    banner.hidden = false;
    const text = document.createElement("span");
    text.className = "banner-message";
    text.textContent = message;
    banner.appendChild(text);
    if (onRetry) {
      const retry = document.createElement("button");
      retry.type = "button";
      retry.className = "retry";
      retry.textContent = "Retry";
      retry.addEventListener("click", () => {
        banner.hidden = true;
        onRetry();
      });
      banner.appendChild(retry);
    }
    const dismiss = document.createElement("button");
    dismiss.type = "button";
    dismiss.className = "dismiss";
    dismiss.textContent = "×";
    dismiss.addEventListener("click", () => {
      banner.hidden = true;
    });
    banner.appendChild(dismiss);
  }

  function setStatus(text: string): void {
    status.textContent = text;
  }

  async function loadPieces(): Promise<void> {
    state.status = "loading";
    setStatus("Loading pieces…");
    try {
      const pieces = await client.pieces();
      state.pieces = pieces;
      renderPieceOptions(select, pieces);
      state.status = "idle";
      setStatus(pieces.length === 0 ? "No pieces in the catalog." : "");
    } catch (err) {
      state.status = "error";
      state.error = messageOf(err);
      setStatus("");
      showBanner(state.error, loadPieces);
    }
  }

  async function loadPerformances(pieceId: string): Promise<void> {
    try {
      const doc = await client.performances(pieceId);
      if (state.selectedPieceId !== pieceId) return;
      renderPerformances(performers, doc.performances);
    } catch (err) {
      showBanner(messageOf(err), null);
    }
  }

  async function runQuery(): Promise<void> {
    const pieceId = state.selectedPieceId;
    const text = input.value.trim();
    state.queryText = text;
    if (!pieceId) {
      setStatus("Choose a piece first.");
      return;
    }
    if (!text) return;

    const ticket = sequencer.next();
    state.status = "loading";
    setStatus("Ranking…");
    try {
      const doc = await client.query(pieceId, text);
      if (!sequencer.isCurrent(ticket)) return;
      state.result = doc;
      state.oovTokens = doc.warnings.oov_tokens;
      state.status = "ready";
      state.error = null;
      setStatus("");
      renderWarnings(warnings, doc.warnings);
      renderResults(results, doc);
    } catch (err) {
      if (!sequencer.isCurrent(ticket)) return;
      state.status = "error";
      state.error = messageOf(err);
      setStatus("");
      if (err instanceof ApiError && err.code === "unencodable_query") {
        state.oovTokens = err.oovTokens;
        warnings.innerHTML = "";
        renderInlineError(results, err.message, err.oovTokens);
      } else {
        showBanner(state.error, null);
      }
    }
  }

  select.addEventListener("change", () => {
    const pieceId = select.value || null;
    state.selectedPieceId = pieceId;
    // A piece switch orphans any in-flight query and the shown result.
    sequencer.invalidate();
    state.result = null;
    results.innerHTML = "";
    warnings.innerHTML = "";
    performers.innerHTML = "";
    setStatus("");
    if (pieceId) void loadPerformances(pieceId);
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (debounceTimer !== null) clearTimeout(debounceTimer);
    debounceTimer = setTimeout(() => {
      debounceTimer = null;
      void runQuery();
    }, debounceMs);
  });

  return {
    start: loadPieces,
    state,
    root,
  };
}
