// Thin typed client for the three documented endpoints. The fetch
// implementation is injected so tests can substitute a fixture backend.

import type { CorpusInfo, HealthInfo, QueryRequest, QueryResponse } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const body: unknown = await resp.json();
        if (body && typeof body === "object" && typeof (body as { error?: unknown }).error === "string") {
          message = (body as { error: string }).error;
        }
      } catch {
        // non-JSON error body, keep the status message
      }
      throw new ApiError(resp.status, message);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  corpora(): Promise<CorpusInfo[]> {
    return this.request<CorpusInfo[]>("/corpora");
  }

  query(req: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }
}
