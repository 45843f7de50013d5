// Pure view-model builders. No DOM access, no attribution math beyond
// ranking/scaling what the service returned, so everything here is unit
// testable in node.

import { formatPercent, formatScore } from "./format.js";
import type {
  PartitionPreview,
  PoisonPayload,
  SourceSpanDto,
  StatementInfo,
} from "./types.js";

export class DimensionMismatchError extends Error {
  constructor(weights: number, sources: number) {
    super(`attribution has ${weights} weights but the partition has ${sources} sources`);
    this.name = "DimensionMismatchError";
  }
}

export type TintSign = "positive" | "negative" | "none";

export interface HighlightSpan {
  index: number;
  text: string;
  trailingSeparator: string;
  score: number;
  sign: TintSign;
  /** 0..1 share of the largest |score|; 0 renders with no tint at all. */
  intensity: number;
}

/** Diverging tint model: sign picks the hue, |score|/max|score| the alpha. */
export function buildHighlights(weights: number[], partition: PartitionPreview): HighlightSpan[] {
  if (weights.length !== partition.sources.length) {
    throw new DimensionMismatchError(weights.length, partition.sources.length);
  }
  const largest = Math.max(...weights.map(Math.abs), 0);
  return partition.sources.map((source, index) => {
    const score = weights[index] ?? 0;
    const sign: TintSign = score > 0 ? "positive" : score < 0 ? "negative" : "none";
    return {
      index,
      text: source.text,
      trailingSeparator: source.trailingSeparator,
      score,
      sign,
      intensity: largest > 0 && score !== 0 ? Math.abs(score) / largest : 0,
    };
  });
}

export interface SidebarRow {
  rank: number;
  index: number;
  score: number;
  display: string;
  text: string;
}

/**
 * Ranked top-k rows. Zero-scored sources carry no attribution and never
 * appear; the rest order by score descending with ties broken by index.
 */
export function buildSidebar(weights: number[], partition: PartitionPreview, k: number): SidebarRow[] {
  if (weights.length !== partition.sources.length) {
    throw new DimensionMismatchError(weights.length, partition.sources.length);
  }
  const candidates = weights
    .map((score, index) => ({ score, index }))
    .filter((entry) => entry.score !== 0)
    .sort((a, b) => (b.score - a.score) || (a.index - b.index))
    .slice(0, Math.max(0, k));
  return candidates.map((entry, position) => ({
    rank: position + 1,
    index: entry.index,
    score: entry.score,
    display: formatScore(entry.score),
    text: partition.sources[entry.index]?.text ?? "",
  }));
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function tintStyle(span: HighlightSpan): string {
  if (span.sign === "none" || span.intensity === 0) return "";
  const alpha = (0.15 + 0.55 * span.intensity).toFixed(3);
  const color = span.sign === "positive" ? `rgba(46,139,87,${alpha})` : `rgba(205,92,92,${alpha})`;
  return ` style="background-color:${color}"`;
}

export function renderHighlightsHtml(spans: HighlightSpan[]): string {
  return spans
    .map(
      (span) =>
        `<span class="source" id="source-${span.index}" data-index="${span.index}"` +
        `${tintStyle(span)}>${escapeHtml(span.text)}</span>${escapeHtml(span.trailingSeparator || " ")}`,
    )
    .join("");
}

export function renderSidebarHtml(rows: SidebarRow[]): string {
  if (rows.length === 0) {
    return '<p class="empty">No attributed sources.</p>';
  }
  const items = rows
    .map(
      (row) =>
        `<li data-index="${row.index}"><button class="jump" data-target="source-${row.index}">` +
        `<span class="rank">#${row.rank}</span> <span class="score">${row.display}</span> ` +
        `<span class="snippet">${escapeHtml(row.text.slice(0, 80))}</span></button></li>`,
    )
    .join("");
  return `<ol class="sidebar">${items}</ol>`;
}

export interface GaugeModel {
  fraction: number;
  label: string;
}

export function buildGauge(score: number): GaugeModel {
  return { fraction: score, label: formatPercent(score) };
}

export interface BadgeModel {
  index: number;
  rank: number;
}

export function buildBadges(report: PoisonPayload): BadgeModel[] {
  return report.flagged.map((index, position) => ({ index, rank: position + 1 }));
}

export function describeSnappedSpan(statement: StatementInfo, response: string): string {
  const text = response.slice(statement.charStart, statement.charEnd);
  return `tokens [${statement.tokenStart}, ${statement.tokenEnd}) | chars [${statement.charStart}, ${statement.charEnd}): "${text}"`;
}

export function highlightStatementHtml(response: string, statement: StatementInfo | null): string {
  if (!statement) return escapeHtml(response);
  const before = escapeHtml(response.slice(0, statement.charStart));
  const inside = escapeHtml(response.slice(statement.charStart, statement.charEnd));
  const after = escapeHtml(response.slice(statement.charEnd));
  return `${before}<mark class="statement">${inside}</mark>${after}`;
}
