import type {
  AttributeRequest,
  GenerateResponse,
  JobRecord,
  PartitionPreview,
  PoisonPayload,
  PrunePayload,
  VerifyPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the service's JSON API. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      const envelope = body as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        envelope.code ?? "unknown",
        envelope.message ?? `request failed with ${response.status}`,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  previewPartition(context: string, granularity = "sentence"): Promise<PartitionPreview> {
    const params = new URLSearchParams({ context, granularity });
    return this.request<PartitionPreview>(`/v1/partitions?${params.toString()}`);
  }

  generate(body: { context: string; query: string; template?: string; seed?: number }) {
    return this.post<GenerateResponse>("/v1/generate", body);
  }

  submitAttribution(body: AttributeRequest): Promise<{ jobId: string }> {
    return this.post<{ jobId: string }>("/v1/attribute", body);
  }

  getJob(jobId: string): Promise<JobRecord> {
    return this.request<JobRecord>(`/v1/jobs/${jobId}`);
  }

  verify(body: { context: string; query: string; answer?: string; k: number; n?: number; seed?: number; template?: string }) {
    return this.post<VerifyPayload>("/v1/verify", body);
  }

  prune(body: { context: string; query: string; k: number; n?: number; seed?: number; template?: string }) {
    return this.post<PrunePayload>("/v1/prune", body);
  }

  poisonScan(body: { context: string; query: string; k: number; n?: number; seed?: number; template?: string }) {
    return this.post<PoisonPayload>("/v1/poison-scan", body);
  }
}
