// Wire types for the attribution service API. The UI performs no attribution
// math of its own: every number on screen originates from these payloads.

export interface SourceSpanDto {
  index: number;
  charStart: number;
  charEnd: number;
  text: string;
  trailingSeparator: string;
}

export interface PartitionPreview {
  granularity: string;
  d: number;
  sources: SourceSpanDto[];
}

export interface GenerateResponse {
  response: string;
  tokens: string[];
  tokenLogProbs: number[];
}

export interface AttributionPayload {
  version: number;
  weights: number[];
  intercept: number;
  lambda: number;
  nAblations: number;
  seed: number;
  heldOutRmse: number | null;
}

export interface StatementInfo {
  tokenStart: number;
  tokenEnd: number;
  charStart: number;
  charEnd: number;
}

export interface AttributionJobResult {
  attribution: AttributionPayload;
  response: string;
  statement: StatementInfo;
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  jobId: string;
  status: JobStatus;
  progress: { completed: number; total: number };
  result: AttributionJobResult | null;
  error: string | null;
}

export interface VerifyPayload {
  score: number;
  usedSourceIndices: number[];
  mergedStatement: string;
  attribution?: AttributionPayload;
}

export interface PrunePayload {
  firstResponse: string;
  newResponse: string;
  prunedContext: string;
  prunedSources: SourceSpanDto[];
  attribution: AttributionPayload;
}

export interface PoisonPayload {
  flagged: number[];
  k: number;
  ranks: Record<string, number>;
  scores: number[];
  response?: string;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
}

export interface CharRange {
  charStart: number;
  charEnd: number;
}

export interface AttributeRequest {
  context: string;
  query: string;
  response?: string;
  statement?: CharRange;
  n?: number;
  alpha?: number;
  seed?: number;
  granularity?: string;
  template?: string;
}
