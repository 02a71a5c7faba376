// Thin client over the annotation service; every call returns parsed JSON or
// throws ApiError carrying the HTTP status (409 means "not ready / stale").

import {
  Answer,
  DesignTuple,
  JobStatus,
  PosteriorPayload,
  QueryPayload,
  SessionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetcher: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async call<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetcher(this.base + path, init);
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ApiError(res.status, (body as { error?: string }).error ?? res.statusText);
    }
    return body as T;
  }

  session(): Promise<SessionInfo> {
    return this.call("/api/session");
  }

  posterior(): Promise<PosteriorPayload> {
    return this.call("/api/posterior");
  }

  query(exclude: DesignTuple[] = []): Promise<QueryPayload> {
    const params = exclude.map((d) => `exclude=${d.join(".")}`).join("&");
    return this.call(`/api/query${params ? "?" + params : ""}`);
  }

  async answer(design: DesignTuple, answer: Answer): Promise<string> {
    const body = await this.call<{ job: string }>("/api/answer", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ design, answer }),
    });
    return body.job;
  }

  job(id: string): Promise<JobStatus> {
    return this.call(`/api/job/${id}`);
  }

  /** Poll a job every `intervalMs` until it finishes; throws on failure. */
  async pollJob(
    id: string,
    intervalMs = 500,
    sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ): Promise<JobStatus> {
    for (;;) {
      const status = await this.job(id);
      if (status.status === "done") return status;
      if (status.status === "failed") {
        throw new ApiError(500, status.error ?? "sampling job failed");
      }
      await sleep(intervalMs);
    }
  }
}
