// Session state is a pure function of the latest service responses plus the
// local selection; reducers below are the only way it changes.

import type {
  AttributionJobResult,
  CharRange,
  JobRecord,
  PartitionPreview,
  PoisonPayload,
  PrunePayload,
  VerifyPayload,
} from "./types.js";

export interface JobView {
  jobId: string;
  status: string;
  completed: number;
  total: number;
}

export interface SessionState {
  context: string;
  query: string;
  response: string;
  partition: PartitionPreview | null;
  /** Raw mouse selection; may be mid-token until the server snaps it. */
  selection: CharRange | null;
  /** Server-snapped statement; display always follows this once known. */
  attribution: AttributionJobResult | null;
  k: number;
  job: JobView | null;
  verify: VerifyPayload | null;
  prune: PrunePayload | null;
  poison: PoisonPayload | null;
  error: string | null;
  rawVisible: boolean;
}

export function initialState(): SessionState {
  return {
    context: "",
    query: "",
    response: "",
    partition: null,
    selection: null,
    attribution: null,
    k: 5,
    job: null,
    verify: null,
    prune: null,
    poison: null,
    error: null,
    rawVisible: false,
  };
}

export function withInputs(state: SessionState, context: string, query: string): SessionState {
  // editing inputs invalidates everything derived from the old ones
  return {
    ...initialState(),
    k: state.k,
    rawVisible: state.rawVisible,
    context,
    query,
  };
}

export function withPartition(state: SessionState, partition: PartitionPreview): SessionState {
  return { ...state, partition, error: null };
}

export function withResponse(state: SessionState, response: string): SessionState {
  return {
    ...state,
    response,
    selection: null,
    attribution: null,
    verify: null,
    prune: null,
    poison: null,
    job: null,
  };
}

export function withSelection(state: SessionState, selection: CharRange | null): SessionState {
  return { ...state, selection };
}

export function withJobUpdate(state: SessionState, record: JobRecord): SessionState {
  const job: JobView = {
    jobId: record.jobId,
    status: record.status,
    completed: record.progress.completed,
    total: record.progress.total,
  };
  if (record.status === "failed") {
    return { ...state, job, error: record.error ?? "attribution failed" };
  }
  if (record.status === "done" && record.result) {
    // scores and the displayed statement arrive together, so the invariant
    // "displayed scores correspond to the displayed statement" holds
    return {
      ...state,
      job,
      attribution: record.result,
      selection: {
        charStart: record.result.statement.charStart,
        charEnd: record.result.statement.charEnd,
      },
      error: null,
    };
  }
  return { ...state, job };
}

export function withVerify(state: SessionState, verify: VerifyPayload): SessionState {
  return { ...state, verify };
}

export function withPrune(state: SessionState, prune: PrunePayload): SessionState {
  return { ...state, prune };
}

export function withPoison(state: SessionState, poison: PoisonPayload): SessionState {
  return { ...state, poison };
}

export function withError(state: SessionState, error: string): SessionState {
  return { ...state, error };
}

export function withK(state: SessionState, k: number): SessionState {
  return { ...state, k: Math.max(1, Math.round(k)) };
}

export function toggleRaw(state: SessionState): SessionState {
  return { ...state, rawVisible: !state.rawVisible };
}

/** Everything the raw-JSON toggle exposes. */
export function rawPayloads(state: SessionState): Record<string, unknown> {
  return {
    attribution: state.attribution,
    verify: state.verify,
    prune: state.prune,
    poison: state.poison,
  };
}
