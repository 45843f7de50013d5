import { describe, expect, it } from "vitest";

import {
  initialState,
  rawPayloads,
  toggleRaw,
  withInputs,
  withJobUpdate,
  withK,
  withResponse,
  withSelection,
} from "../src/state.js";
import type { JobRecord } from "../src/types.js";

function doneRecord(): JobRecord {
  return {
    jobId: "job-1",
    status: "done",
    progress: { completed: 8, total: 8 },
    result: {
      attribution: {
        version: 1,
        weights: [1, 0],
        intercept: 0,
        lambda: 0.01,
        nAblations: 8,
        seed: 0,
        heldOutRmse: null,
      },
      response: "The answer is blue.",
      statement: { tokenStart: 1, tokenEnd: 2, charStart: 4, charEnd: 11 },
    },
    error: null,
  };
}

describe("session state", () => {
  it("editing inputs resets derived state but keeps preferences", () => {
    let state = initialState();
    state = withK(state, 9);
    state = withResponse(state, "old response");
    state = withInputs(state, "new ctx", "new q");
    expect(state.context).toBe("new ctx");
    expect(state.response).toBe("");
    expect(state.attribution).toBeNull();
    expect(state.k).toBe(9);
  });

  it("a finished job snaps the selection to the server statement", () => {
    let state = withResponse(initialState(), "The answer is blue.");
    state = withSelection(state, { charStart: 6, charEnd: 9 });
    state = withJobUpdate(state, doneRecord());
    expect(state.attribution?.statement.charStart).toBe(4);
    expect(state.selection).toEqual({ charStart: 4, charEnd: 11 });
    expect(state.job?.status).toBe("done");
  });

  it("failed jobs surface the error", () => {
    const failed: JobRecord = {
      jobId: "job-2",
      status: "failed",
      progress: { completed: 2, total: 8 },
      result: null,
      error: "ProviderUnavailable: down",
    };
    const state = withJobUpdate(initialState(), failed);
    expect(state.error).toContain("ProviderUnavailable");
  });

  it("progress updates do not invent results", () => {
    const running: JobRecord = {
      jobId: "job-3",
      status: "running",
      progress: { completed: 4, total: 8 },
      result: null,
      error: null,
    };
    const state = withJobUpdate(initialState(), running);
    expect(state.attribution).toBeNull();
    expect(state.job).toEqual({ jobId: "job-3", status: "running", completed: 4, total: 8 });
  });

  it("k is clamped to a positive integer", () => {
    expect(withK(initialState(), 0).k).toBe(1);
    expect(withK(initialState(), 7.4).k).toBe(7);
  });

  it("raw toggle exposes exactly the latest payloads", () => {
    let state = withJobUpdate(initialState(), doneRecord());
    state = toggleRaw(state);
    expect(state.rawVisible).toBe(true);
    const raw = rawPayloads(state);
    expect(Object.keys(raw).sort()).toEqual(["attribution", "poison", "prune", "verify"]);
    expect(raw.attribution).toBe(state.attribution);
  });
});
