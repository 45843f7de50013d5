import type { ApiClient } from "./api.js";
import type { JobRecord } from "./types.js";

const TERMINAL: ReadonlySet<string> = new Set(["done", "failed"]);

export interface PollHandle {
  /** Resolves with the terminal record, or null when cancelled. */
  result: Promise<JobRecord | null>;
  cancel(): void;
}

/**
 * Poll a job until it is done or failed, reporting every observed record.
 * One attribution job is active per session: the controller cancels the
 * previous handle before starting a new one.
 */
export function pollJob(
  api: ApiClient,
  jobId: string,
  onUpdate: (record: JobRecord) => void,
  intervalMs = 150,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): PollHandle {
  let cancelled = false;
  const result = (async () => {
    while (!cancelled) {
      const record = await api.getJob(jobId);
      if (cancelled) return null;
      onUpdate(record);
      if (TERMINAL.has(record.status)) return record;
      await sleep(intervalMs);
    }
    return null;
  })();
  return {
    result,
    cancel: () => {
      cancelled = true;
    },
  };
}
