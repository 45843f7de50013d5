/** Round a score to three significant digits (round, never truncate). */
export function formatScore(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (value === 0) return "0";
  return Number(value.toPrecision(3)).toString();
}

/** Percentage with one decimal, rounded. */
export function formatPercent(fraction: number): string {
  return `${(Math.round(fraction * 1000) / 10).toFixed(1)}%`;
}

/** Progress line for the job panel. */
export function formatProgress(completed: number, total: number): string {
  return total > 0 ? `${completed}/${total} ablations` : "starting";
}
