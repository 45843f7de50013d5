import type { ApiClient } from "./api.js";
import { pollJob, type PollHandle } from "./poll.js";
import {
  initialState,
  rawPayloads,
  type SessionState,
  toggleRaw,
  withError,
  withInputs,
  withJobUpdate,
  withK,
  withPartition,
  withPoison,
  withPrune,
  withResponse,
  withSelection,
  withVerify,
} from "./state.js";
import type { CharRange } from "./types.js";

export type Listener = (state: SessionState) => void;

/**
 * Orchestrates the session: one active attribution job at a time, every
 * state change driven by a service response or a local selection.
 */
export class SessionController {
  private state: SessionState = initialState();
  private listeners: Listener[] = [];
  private activePoll: PollHandle | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly pollIntervalMs = 150,
  ) {}

  get current(): SessionState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private commit(state: SessionState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  setInputs(context: string, query: string): void {
    this.cancelPolling();
    this.commit(withInputs(this.state, context, query));
  }

  setK(k: number): void {
    this.commit(withK(this.state, k));
  }

  toggleRawView(): void {
    this.commit(toggleRaw(this.state));
  }

  rawJson(): string {
    return JSON.stringify(rawPayloads(this.state), null, 2);
  }

  select(range: CharRange | null): void {
    if (range && (range.charStart >= range.charEnd || !this.state.response)) {
      return; // selections outside/empty leave the action disabled
    }
    this.commit(withSelection(this.state, range));
  }

  canAttribute(): boolean {
    return this.state.response.length > 0;
  }

  async loadPartitionPreview(): Promise<void> {
    try {
      const preview = await this.api.previewPartition(this.state.context);
      this.commit(withPartition(this.state, preview));
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }

  async generate(seed?: number): Promise<void> {
    try {
      const generated = await this.api.generate({
        context: this.state.context,
        query: this.state.query,
        ...(seed !== undefined ? { seed } : {}),
      });
      this.commit(withResponse(this.state, generated.response));
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }

  /**
   * Submit an attribution for the current selection (whole response when
   * nothing is selected). Cancels polling on any previous job.
   */
  async attributeSelection(options: { n?: number; seed?: number } = {}): Promise<void> {
    if (!this.canAttribute()) {
      this.commit(withError(this.state, "generate a response first"));
      return;
    }
    this.cancelPolling();
    try {
      const submitted = await this.api.submitAttribution({
        context: this.state.context,
        query: this.state.query,
        response: this.state.response,
        ...(this.state.selection ? { statement: this.state.selection } : {}),
        ...(options.n !== undefined ? { n: options.n } : {}),
        ...(options.seed !== undefined ? { seed: options.seed } : {}),
      });
      const handle = pollJob(
        this.api,
        submitted.jobId,
        (record) => this.commit(withJobUpdate(this.state, record)),
        this.pollIntervalMs,
      );
      this.activePoll = handle;
      await handle.result;
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }

  cancelPolling(): void {
    if (this.activePoll) {
      this.activePoll.cancel();
      this.activePoll = null;
    }
  }

  async runVerify(options: { n?: number; seed?: number } = {}): Promise<void> {
    try {
      const verdict = await this.api.verify({
        context: this.state.context,
        query: this.state.query,
        answer: this.state.response || undefined,
        k: this.state.k,
        ...options,
      });
      this.commit(withVerify(this.state, verdict));
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }

  async runPrune(options: { n?: number; seed?: number } = {}): Promise<void> {
    try {
      const pruned = await this.api.prune({
        context: this.state.context,
        query: this.state.query,
        k: this.state.k,
        ...options,
      });
      this.commit(withPrune(this.state, pruned));
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }

  async runPoisonScan(options: { n?: number; seed?: number } = {}): Promise<void> {
    try {
      const report = await this.api.poisonScan({
        context: this.state.context,
        query: this.state.query,
        k: this.state.k,
        ...options,
      });
      this.commit(withPoison(this.state, report));
    } catch (error) {
      this.commit(withError(this.state, describe(error)));
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof Error) return error.message;
  return String(error);
}
