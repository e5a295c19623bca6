// DOM wiring for the rephrase-and-rescore editor. All behavior lives in
// EditorSession; this file only reads state and paints it.

import { ApiClient, Suggestion } from "./api.js";
import { breakdownRows, formatProbability, gaugeBand, sparklinePoints } from "./render.js";
import { EditorSession } from "./state.js";
import { charCounter } from "./validation.js";

const client = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const summaryInput = el<HTMLTextAreaElement>("summary");
const detailsInput = el<HTMLTextAreaElement>("details");
const weekSelect = el<HTMLSelectElement>("week");
const platformSelect = el<HTMLSelectElement>("platform");
const versionSelect = el<HTMLSelectElement>("product-version");
const counter = el<HTMLSpanElement>("char-counter");
const validation = el<HTMLDivElement>("validation");
const banner = el<HTMLDivElement>("banner");
const gauge = el<HTMLDivElement>("gauge");
const gaugeValue = el<HTMLSpanElement>("gauge-value");
const gaugeMeta = el<HTMLSpanElement>("gauge-meta");
const topicChip = el<HTMLSpanElement>("topic-chip");
const breakdownList = el<HTMLUListElement>("breakdown");
const suggestionList = el<HTMLUListElement>("suggestions");
const sparkline = el<HTMLElement>("sparkline");
const undoButton = el<HTMLButtonElement>("undo");
const upliftChip = el<HTMLSpanElement>("uplift-chip");

const session = new EditorSession(client, { quietMs: 300, onChange: render });

let upliftSeq = 0;

function render(): void {
  syncInputs();
  counter.textContent = charCounter(session.summary);
  counter.classList.toggle("over", session.summary.length > 170);
  validation.textContent = session.validationError ?? "";
  banner.textContent = session.serviceError ? `service error: ${session.serviceError}` : "";
  banner.hidden = !session.serviceError;
  undoButton.disabled = !session.canUndo;

  const score = session.score;
  if (!score) {
    gaugeValue.textContent = "—";
    gaugeMeta.textContent = "type a question to score it";
    gauge.dataset.band = "";
    topicChip.hidden = true;
    breakdownList.replaceChildren();
  } else {
    gaugeValue.textContent = formatProbability(score.probability);
    const staleNote = session.scoreStale ? " (stale)" : "";
    gaugeMeta.textContent =
      `percentile ${score.percentile.toFixed(0)} · coherency ${score.coherency.toFixed(2)}${staleNote}`;
    gauge.dataset.band = gaugeBand(score.percentile);
    gauge.classList.toggle("stale", session.scoreStale);
    topicChip.hidden = false;
    topicChip.textContent = `topic ${score.topic.id}: ${score.topic.keywords.slice(0, 3).join(", ")}`;
    breakdownList.replaceChildren(
      ...breakdownRows(score).map((row) => {
        const item = document.createElement("li");
        const name = document.createElement("span");
        name.textContent = row.name;
        const bar = document.createElement("span");
        bar.className = row.value >= 0 ? "bar pos" : "bar neg";
        bar.style.width = `${Math.min(Math.abs(row.value) * 40, 120)}px`;
        const value = document.createElement("span");
        value.className = "value";
        value.textContent = row.value.toFixed(2);
        item.append(name, bar, value);
        return item;
      }),
    );
  }

  suggestionList.replaceChildren(
    ...(session.suggestions?.items ?? []).map((s) => suggestionItem(s)),
  );
  if (session.suggestionsPending) {
    const pending = document.createElement("li");
    pending.className = "pending";
    pending.textContent = "fetching suggestions…";
    suggestionList.append(pending);
  }

  sparkline.innerHTML =
    `<svg viewBox="0 0 120 28" preserveAspectRatio="none">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" ` +
    `points="${sparklinePoints(session.history, 120, 28)}"/></svg>`;
}

function suggestionItem(s: Suggestion): HTMLLIElement {
  const item = document.createElement("li");
  const head = document.createElement("div");
  head.className = "suggestion-head";
  head.textContent = `+${s.delta.toFixed(3)} · ${s.description}`;
  const preview = document.createElement("div");
  preview.className = "suggestion-preview";
  preview.textContent = s.summary;
  const apply = document.createElement("button");
  apply.textContent = "Apply";
  apply.addEventListener("click", () => {
    const result = session.applySuggestion(s);
    if (!result.ok) {
      banner.textContent = result.message;
      banner.hidden = false;
    }
  });
  item.append(head, preview, apply);
  return item;
}

function refreshUplift(): void {
  if (!session.summary.trim() || session.validationError) {
    upliftChip.hidden = true;
    return;
  }
  const seq = ++upliftSeq;
  client
    .uplift({
      summary: session.summary,
      details: session.details || null,
      week: session.context.week,
      platform: session.context.platform,
      product_version: session.context.productVersion,
    })
    .then((resp) => {
      if (seq !== upliftSeq) return;
      upliftChip.hidden = false;
      upliftChip.textContent =
        resp.recommendation === "add_details"
          ? `adding details likely helps (uplift ${resp.uplift_score.toFixed(3)})`
          : `fine as is (uplift ${resp.uplift_score.toFixed(3)})`;
    })
    .catch(() => {
      upliftChip.hidden = true; // bundle without an uplift forest
    });
}

summaryInput.addEventListener("input", () => session.setSummary(summaryInput.value));
detailsInput.addEventListener("input", () => session.setDetails(detailsInput.value));
weekSelect.addEventListener("change", () => session.setContext({ week: Number(weekSelect.value) }));
platformSelect.addEventListener("change", () => session.setContext({ platform: platformSelect.value }));
versionSelect.addEventListener("change", () =>
  session.setContext({ productVersion: versionSelect.value }),
);
undoButton.addEventListener("click", () => {
  session.undo();
  syncInputs();
});

// applying a suggestion rewrites the text outside of user typing; keep the
// textareas in sync whenever the session, not the user, changed them
function syncInputs(): void {
  if (summaryInput.value !== session.summary && document.activeElement !== summaryInput) {
    summaryInput.value = session.summary;
  }
  if (detailsInput.value !== session.details && document.activeElement !== detailsInput) {
    detailsInput.value = session.details;
  }
}

setInterval(refreshUplift, 1500);

for (let week = 1; week <= 15; week += 1) {
  const option = document.createElement("option");
  option.value = String(week);
  option.textContent = `week ${week}`;
  weekSelect.append(option);
}

client
  .health()
  .then((h) => {
    el<HTMLSpanElement>("bundle-version").textContent = `bundle ${h.bundle_version}`;
  })
  .catch(() => {
    banner.textContent = "scoring service unreachable";
    banner.hidden = false;
  });

render();
