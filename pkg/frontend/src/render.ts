// Pure view helpers kept DOM-free so they are trivially testable.

import { ScoreResponse } from "./api.js";
import { HistoryEntry } from "./state.js";

export type GaugeBand = "low" | "mid" | "high";

// Bands keyed to the bundle's configured percentile pair, not to fixed
// probabilities: the score distribution is heavily left-skewed.
export function gaugeBand(percentile: number, low = 20, high = 80): GaugeBand {
  if (percentile < low) return "low";
  if (percentile >= high) return "high";
  return "mid";
}

export function formatProbability(p: number): string {
  return p.toFixed(3);
}

export function breakdownRows(score: ScoreResponse): Array<{ name: string; value: number }> {
  return Object.entries(score.feature_breakdown)
    .map(([name, value]) => ({ name, value }))
    .sort((a, b) => Math.abs(b.value) - Math.abs(a.value));
}

/** SVG polyline points for the score-over-edits sparkline. */
export function sparklinePoints(history: HistoryEntry[], width: number, height: number): string {
  if (history.length === 0) {
    return "";
  }
  const probs = history.map((h) => h.probability);
  const max = Math.max(...probs, 1e-9);
  const step = history.length > 1 ? width / (history.length - 1) : 0;
  return probs
    .map((p, i) => {
      const x = history.length > 1 ? i * step : width / 2;
      const y = height - (p / max) * (height - 2) - 1;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
