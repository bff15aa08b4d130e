// DOM rendering for the review panel. Formatting only: every figure on
// screen is a server number passed through toFixed, never recomputed.

import { NeighborRow, PredictResponse } from "./api.js";
import { ReviewSession } from "./session.js";

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

export function renderErrorBanner(code: string): HTMLElement {
  const banner = el("div", "error-banner", code);
  banner.setAttribute("role", "alert");
  return banner;
}

function renderProbabilityBars(prediction: PredictResponse): HTMLElement {
  const wrap = el("section", "probability-bars");
  wrap.appendChild(el("h2", undefined, "Weakness probabilities"));
  for (const row of prediction.predictions) {
    const item = el("div", "prob-row");
    item.dataset.label = row.label;
    item.appendChild(el("span", "prob-label", row.label));
    const track = el("div", "prob-track");
    const bar = el("div", "prob-fill");
    bar.style.width = `${Math.round(row.p_fused * 100)}%`;
    track.appendChild(bar);
    item.appendChild(track);
    item.appendChild(el("span", "prob-value", row.p_fused.toFixed(4)));
    item.title = `vanilla ${row.p_vanilla.toFixed(4)}, composite ${row.p_composite.toFixed(4)}`;
    wrap.appendChild(item);
  }
  return wrap;
}

function renderNeighborRow(
  neighbor: NeighborRow,
  session: ReviewSession,
): HTMLElement {
  const row = el("div", "neighbor-row");
  row.dataset.neighborId = neighbor.id;
  row.appendChild(el("span", "neighbor-name", neighbor.name || neighbor.id));
  row.appendChild(el("span", "neighbor-distance", neighbor.distance.toFixed(4)));
  for (const bugId of neighbor.bug_ids) {
    row.appendChild(el("span", "badge badge-bug", bugId));
  }
  if (neighbor.fix_id) {
    row.appendChild(el("span", "badge badge-fix", neighbor.fix_id));
  }

  const voteState = session.neighborVotes.get(neighbor.id);
  if (voteState) {
    row.appendChild(
      el("span", "vote-count", `votes: ${voteState.voteCount}`),
    );
    if (voteState.lastMovedDistance !== null) {
      row.appendChild(
        el("span", "moved-distance", `moved ${voteState.lastMovedDistance.toFixed(5)}`),
      );
    }
  }

  for (const polarity of ["+", "-"] as const) {
    const button = el("button", "vote-button", polarity);
    button.disabled = !session.canVote;
    button.addEventListener("click", () => {
      void session.castVote(neighbor.id, polarity);
    });
    row.appendChild(button);
  }
  return row;
}

function renderNeighbors(
  prediction: PredictResponse,
  session: ReviewSession,
): HTMLElement {
  const wrap = el("section", "neighbors");
  wrap.appendChild(el("h2", undefined, "Similar historical functions"));
  if (prediction.neighbors.length === 0) {
    wrap.appendChild(el("p", "empty", "no similar functions found"));
    return wrap;
  }
  for (const neighbor of prediction.neighbors) {
    wrap.appendChild(renderNeighborRow(neighbor, session));
  }
  return wrap;
}

function renderHistory(session: ReviewSession): HTMLElement {
  const wrap = el("section", "vote-history");
  wrap.appendChild(el("h2", undefined, "Vote history"));
  for (const entry of session.voteHistory) {
    wrap.appendChild(
      el(
        "div",
        "history-entry",
        `${entry.polarity} ${entry.neighborId}: vote #${entry.voteCount}, ` +
          `moved ${entry.movedDistance.toFixed(5)}`,
      ),
    );
  }
  return wrap;
}

export function renderPanel(container: HTMLElement, session: ReviewSession): void {
  container.replaceChildren();
  if (session.lastError !== null) {
    container.appendChild(renderErrorBanner(session.lastError));
  }
  const prediction = session.prediction;
  if (prediction === null) return;

  container.appendChild(renderProbabilityBars(prediction));

  if (prediction.suggested_fix) {
    const fix = el(
      "div",
      "suggested-fix",
      `Suggested fix ${prediction.suggested_fix.fix_id} ` +
        `from ${prediction.suggested_fix.neighbor_id}`,
    );
    container.appendChild(fix);
  }
  if (prediction.bug_count_estimate !== undefined) {
    container.appendChild(
      el(
        "div",
        "bug-count",
        `Estimated bug count: ${prediction.bug_count_estimate.toFixed(3)}`,
      ),
    );
  }
  container.appendChild(renderNeighbors(prediction, session));
  if (session.voteHistory.length > 0) {
    container.appendChild(renderHistory(session));
  }
}
