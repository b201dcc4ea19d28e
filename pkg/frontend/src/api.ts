/** Typed fetch client for the trainlim HTTP API. */

import type {
  ApiErrorBody,
  ClosedFormBody,
  ClosedFormResponse,
  ClusterDoc,
  JobResponse,
  PresetsResponse,
  SweepBody,
  SweepResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  status: number;
  body: ApiErrorBody;
  constructor(status: number, body: ApiErrorBody) {
    super(`${body.code}: ${body.message}`);
    this.status = status;
    this.body = body;
  }
}

export interface SweepProgress {
  completed: number;
  total: number;
}

export class Client {
  base: string;
  private fetchFn: FetchLike;
  /** Poll interval for background jobs, ms. */
  pollMs = 500;

  constructor(base = "", fetchFn: FetchLike = fetch.bind(globalThis)) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.base + path, init);
    const payload = (await res.json()) as unknown;
    if (!res.ok) throw new ApiError(res.status, payload as ApiErrorBody);
    return payload as T;
  }

  async presets(): Promise<Map<string, ClusterDoc>> {
    const res = await this.request<PresetsResponse>("GET", "/api/presets");
    return new Map(res.presets.map((p) => [p.name, p.spec]));
  }

  closedForm(body: ClosedFormBody): Promise<ClosedFormResponse> {
    return this.request("POST", "/api/closed-form", body);
  }

  sweepSync(body: SweepBody): Promise<SweepResponse> {
    return this.request("POST", "/api/sweep", body);
  }

  createJob(body: SweepBody): Promise<JobResponse> {
    return this.request("POST", "/api/jobs", body);
  }

  job(id: string): Promise<JobResponse> {
    return this.request("GET", `/api/jobs/${id}`);
  }

  cancelJob(id: string): Promise<JobResponse> {
    return this.request("DELETE", `/api/jobs/${id}`);
  }

  /** Run a sweep, transparently switching to the job API when the grid is
   *  too dense for the synchronous endpoint.  The server decides where that
   *  line is: a 400 "too-many-points" reroutes the same body to /api/jobs,
   *  polled until done, reporting progress along the way. */
  async sweep(
    body: SweepBody,
    onProgress?: (p: SweepProgress) => void,
  ): Promise<SweepResponse> {
    try {
      return await this.sweepSync(body);
    } catch (err) {
      if (!(err instanceof ApiError) || err.body.code !== "too-many-points") {
        throw err;
      }
    }
    const job = await this.createJob(body);
    for (;;) {
      const snap = await this.job(job.id);
      if (snap.progress && onProgress) onProgress(snap.progress);
      if (snap.status === "done") {
        return {
          schema_version: snap.schema_version,
          kind: "sweep",
          units: {},
          records: snap.records ?? [],
          endpoint: snap.endpoint ?? null,
        };
      }
      if (snap.status === "failed") {
        throw new ApiError(422, {
          code: "job-failed",
          message: snap.error ?? "sweep job failed",
        });
      }
      await sleep(this.pollMs);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
