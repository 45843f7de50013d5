// DOM shell: everything interesting lives in the pure modules; this file
// only wires events and repaints.

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { formatPercent, formatProgress, formatScore } from "./format.js";
import type { SessionState } from "./state.js";
import {
  buildBadges,
  buildGauge,
  buildHighlights,
  buildSidebar,
  describeSnappedSpan,
  DimensionMismatchError,
  escapeHtml,
  highlightStatementHtml,
  renderHighlightsHtml,
  renderSidebarHtml,
} from "./view.js";

const api = new ApiClient("");
const controller = new SessionController(api, 400);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const contextInput = el<HTMLTextAreaElement>("context-input");
const queryInput = el<HTMLInputElement>("query-input");
const responseView = el<HTMLDivElement>("response-view");
const contextView = el<HTMLDivElement>("context-view");
const sidebarView = el<HTMLDivElement>("sidebar-view");
const statusView = el<HTMLDivElement>("status-view");
const selectionView = el<HTMLDivElement>("selection-view");
const actionsView = el<HTMLDivElement>("actions-view");
const rawView = el<HTMLPreElement>("raw-view");
const errorBanner = el<HTMLDivElement>("error-banner");
const kSlider = el<HTMLInputElement>("k-slider");
const kLabel = el<HTMLSpanElement>("k-label");

function selectionWithinResponse(): { charStart: number; charEnd: number } | null {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
  const range = selection.getRangeAt(0);
  if (!responseView.contains(range.commonAncestorContainer)) return null;
  const measure = (node: Node, offset: number): number => {
    const probe = document.createRange();
    probe.selectNodeContents(responseView);
    probe.setEnd(node, offset);
    return probe.toString().length;
  };
  const charStart = measure(range.startContainer, range.startOffset);
  const charEnd = measure(range.endContainer, range.endOffset);
  return charStart < charEnd ? { charStart, charEnd } : null;
}

function paint(state: SessionState): void {
  errorBanner.textContent = state.error ?? "";
  errorBanner.hidden = !state.error;

  kLabel.textContent = String(state.k);

  if (state.job) {
    const suffix = state.job.status === "done" ? "done" : state.job.status;
    statusView.textContent = `job ${state.job.jobId}: ${suffix} (${formatProgress(state.job.completed, state.job.total)})`;
  } else {
    statusView.textContent = "";
  }

  if (state.attribution) {
    selectionView.textContent =
      "snapped statement: " +
      describeSnappedSpan(state.attribution.statement, state.attribution.response);
  } else if (state.selection) {
    selectionView.textContent = `selection chars [${state.selection.charStart}, ${state.selection.charEnd}) (awaiting server snap)`;
  } else {
    selectionView.textContent = "select part of the response to attribute a statement";
  }

  responseView.innerHTML = highlightStatementHtml(
    state.response,
    state.attribution ? state.attribution.statement : null,
  );

  if (state.partition && state.attribution) {
    try {
      const spans = buildHighlights(state.attribution.attribution.weights, state.partition);
      contextView.innerHTML = renderHighlightsHtml(spans);
      const rows = buildSidebar(state.attribution.attribution.weights, state.partition, state.k);
      sidebarView.innerHTML = renderSidebarHtml(rows);
    } catch (error) {
      if (error instanceof DimensionMismatchError) {
        // no partial render on dimension mismatch
        contextView.textContent = "";
        sidebarView.textContent = "";
        errorBanner.textContent = error.message;
        errorBanner.hidden = false;
      } else {
        throw error;
      }
    }
  } else {
    contextView.textContent = state.context;
    sidebarView.innerHTML = "";
  }

  const panels: string[] = [];
  if (state.prune) {
    panels.push(
      `<section class="panel"><h3>Prune &amp; regenerate</h3><div class="columns">` +
        `<div><h4>original</h4><p>${escapeHtml(state.prune.firstResponse)}</p></div>` +
        `<div><h4>pruned context (${state.prune.prunedSources.length} sources)</h4>` +
        `<p>${escapeHtml(state.prune.newResponse)}</p></div></div></section>`,
    );
  }
  if (state.verify) {
    const gauge = buildGauge(state.verify.score);
    panels.push(
      `<section class="panel"><h3>Verify</h3>` +
        `<div class="gauge"><div class="gauge-fill" style="width:${formatPercent(gauge.fraction)}"></div></div>` +
        `<p>yes-probability ${gauge.label} | statement: ${escapeHtml(state.verify.mergedStatement)}</p></section>`,
    );
  }
  if (state.poison) {
    const badges = buildBadges(state.poison)
      .map(
        (badge) =>
          `<span class="badge">source ${badge.index} (rank ${badge.rank}, ` +
          `score ${formatScore(state.poison?.scores[badge.index] ?? 0)})</span>`,
      )
      .join(" ");
    panels.push(`<section class="panel"><h3>Poison scan</h3><p>${badges}</p></section>`);
  }
  actionsView.innerHTML = panels.join("");

  rawView.hidden = !state.rawVisible;
  if (state.rawVisible) rawView.textContent = controller.rawJson();
}

controller.subscribe(paint);

el<HTMLButtonElement>("generate-btn").addEventListener("click", async () => {
  controller.setInputs(contextInput.value, queryInput.value);
  await controller.loadPartitionPreview();
  await controller.generate();
});

el<HTMLButtonElement>("attribute-btn").addEventListener("click", () => {
  void controller.attributeSelection();
});

responseView.addEventListener("mouseup", () => {
  controller.select(selectionWithinResponse());
});

kSlider.addEventListener("input", () => controller.setK(Number(kSlider.value)));

el<HTMLButtonElement>("verify-btn").addEventListener("click", () => void controller.runVerify());
el<HTMLButtonElement>("prune-btn").addEventListener("click", () => void controller.runPrune());
el<HTMLButtonElement>("poison-btn").addEventListener("click", () => void controller.runPoisonScan());
el<HTMLButtonElement>("raw-toggle").addEventListener("click", () => controller.toggleRawView());

sidebarView.addEventListener("click", (event) => {
  const button = (event.target as HTMLElement).closest("button.jump");
  if (!button) return;
  const target = document.getElementById(button.getAttribute("data-target") ?? "");
  target?.scrollIntoView({ behavior: "smooth", block: "center" });
});
