import { FEATURE_NAMES } from "./types.js";
import type {
  DeviationPair,
  FeatureName,
  PerformanceRef,
  PieceSummary,
  QueryResponse,
  QueryWarnings,
  RankedResult,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function displayName(feature: FeatureName): string {
  return feature.replace(/_/g, " ");
}

function signed(value: number): string {
  return `${value >= 0 ? "+" : ""}${value.toFixed(2)}`;
}

export function renderPieceOptions(
  select: HTMLSelectElement,
  pieces: PieceSummary[],
): void {
  select.innerHTML = "";
  const placeholder = el("option", undefined, "Choose a piece");
  placeholder.value = "";
  select.appendChild(placeholder);
  for (const piece of pieces) {
    const option = el(
      "option",
      undefined,
      `${piece.title} (${piece.performance_count})`,
    );
    option.value = piece.piece_id;
    select.appendChild(option);
  }
}

export function renderPerformances(
  container: HTMLElement,
  performances: PerformanceRef[],
): void {
  container.innerHTML = "";
  if (performances.length === 0) return;
  const list = el("ul", "performer-list");
  for (const perf of performances) {
    list.appendChild(
      el("li", "performer", `${perf.artist_label} (${perf.performance_id})`),
    );
  }
  container.appendChild(list);
}

/**
 * Horizontal signed bar chart over the 8 feature dimensions: a wide bar
 * for the predicted-profile deviation and a thin overlay bar for this
 * performance's deviation, both measured from the piece mean. `scale` is
 * the largest absolute deviation across the result set so bars are
 * comparable between cards; the zero line sits at the track's midpoint.
 */
export function explanationView(
  deviations: Record<FeatureName, DeviationPair>,
  scale: number,
): HTMLElement {
  const safeScale = Math.max(scale, 1e-9);
  const view = el("div", "explanation");
  for (const feature of FEATURE_NAMES) {
    const pair = deviations[feature];
    const row = el("div", "bar-row");
    row.title =
      `${displayName(feature)}: predicted ${signed(pair.predicted)}, ` +
      `performance ${signed(pair.performance)}`;

    row.appendChild(el("span", "bar-label", displayName(feature)));

    const track = el("div", "bar-track");
    track.appendChild(el("div", "zero-line"));
    for (const [kind, value] of [
      ["predicted", pair.predicted],
      ["performance", pair.performance],
    ] as const) {
      const width = Math.min(Math.abs(value) / safeScale, 1) * 50;
      const bar = el("div", `bar ${kind}`);
      bar.style.width = `${width}%`;
      bar.style.left = value >= 0 ? "50%" : `${50 - width}%`;
      track.appendChild(bar);
    }
    row.appendChild(track);
    row.appendChild(el("span", "bar-value", signed(pair.predicted)));
    view.appendChild(row);
  }
  return view;
}

export function buildResultCard(
  result: RankedResult,
  scale: number,
): HTMLLIElement {
  const card = el("li", "result-card");
  if (result.rank === 1) card.classList.add("top-pick");
  card.dataset.performanceId = result.performance_id;

  const header = el("header", "card-header");
  header.appendChild(el("span", "rank-badge", String(result.rank)));
  header.appendChild(el("span", "artist", result.artist_label));
  header.appendChild(el("span", "score", result.score.toFixed(3)));
  card.appendChild(header);

  card.appendChild(el("div", "performance-id", result.performance_id));
  card.appendChild(explanationView(result.deviations, scale));
  return card;
}

/** Render ranked cards exactly in response order; the server's order is
 * the ranking and the client never re-sorts. */
export function renderResults(
  container: HTMLElement,
  doc: QueryResponse,
): void {
  container.innerHTML = "";
  let scale = 0;
  for (const result of doc.results) {
    for (const feature of FEATURE_NAMES) {
      const pair = result.deviations[feature];
      scale = Math.max(scale, Math.abs(pair.predicted), Math.abs(pair.performance));
    }
  }
  for (const result of doc.results) {
    container.appendChild(buildResultCard(result, scale));
  }
}

export function renderWarnings(
  container: HTMLElement,
  warnings: QueryWarnings,
): void {
  container.innerHTML = "";
  for (const token of warnings.oov_tokens) {
    container.appendChild(el("span", "chip", `${token} ignored`));
  }
  for (const note of warnings.notes) {
    container.appendChild(el("span", "note", note));
  }
}

/** Inline (non-banner) error shown in place of results, e.g. when every
 * query word is out of vocabulary. */
export function renderInlineError(
  container: HTMLElement,
  message: string,
  oovTokens: string[],
): void {
  container.innerHTML = "";
  const item = el("li", "inline-error", message);
  if (oovTokens.length > 0) {
    item.appendChild(el("div", "oov-list", `unknown words: ${oovTokens.join(", ")}`));
  }
  container.appendChild(item);
}
