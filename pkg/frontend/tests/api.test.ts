import { describe, expect, it } from "vitest";

import { ApiError, Client, type FetchLike, type SweepProgress } from "../src/api.js";
import type { JobResponse } from "../src/types.js";
import { clusterDoc, okRecord, sweepResponse } from "./fixtures.js";

function jsonResponse(status: number, payload: unknown) {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => payload,
  };
}

/** Route table → FetchLike, recording every call it serves. */
function stubFetch(
  routes: Record<string, (call: number) => { status: number; payload: unknown }>,
) {
  const calls: { url: string; method: string; body: unknown }[] = [];
  const perRoute = new Map<string, number>();
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body === undefined ? undefined : JSON.parse(init.body),
    });
    const route = Object.keys(routes).find((k) => url.endsWith(k));
    if (!route) throw new Error(`unexpected request: ${url}`);
    const n = perRoute.get(route) ?? 0;
    perRoute.set(route, n + 1);
    const { status, payload } = routes[route]!(n);
    return jsonResponse(status, payload);
  };
  return { fetchFn, calls };
}

const SWEEP_BODY = { preset: "dgx-h100", t_min_flop: 1e27, t_max_flop: 1e29 };

describe("Client basics", () => {
  it("turns the preset list into a map keyed by name", async () => {
    const doc = clusterDoc();
    const { fetchFn, calls } = stubFetch({
      "/api/presets": () => ({
        status: 200,
        payload: {
          schema_version: "trainlim-1",
          kind: "presets",
          presets: [{ name: "dgx-h100", spec: doc }],
        },
      }),
    });
    const client = new Client("http://x", fetchFn);
    const presets = await client.presets();
    expect(presets.get("dgx-h100")).toEqual(doc);
    expect(calls[0]).toMatchObject({
      url: "http://x/api/presets",
      method: "GET",
    });
  });

  it("raises ApiError with the server's code and message", async () => {
    const { fetchFn } = stubFetch({
      "/api/sweep": () => ({
        status: 400,
        payload: {
          code: "validation",
          message: "t_min_flop must be positive",
          field: "body.t_min_flop",
        },
      }),
    });
    const client = new Client("", fetchFn);
    const err = await client
      .sweepSync({ ...SWEEP_BODY, t_min_flop: -1 })
      .then(() => null, (e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(400);
    expect(apiErr.body.code).toBe("validation");
    expect(apiErr.body.field).toBe("body.t_min_flop");
    expect(apiErr.message).toBe("validation: t_min_flop must be positive");
  });

  it("posts JSON bodies with the content-type header", async () => {
    const { fetchFn, calls } = stubFetch({
      "/api/sweep": () => ({ status: 200, payload: sweepResponse([]) }),
    });
    await new Client("", fetchFn).sweepSync(SWEEP_BODY);
    expect(calls[0]!.method).toBe("POST");
    expect(calls[0]!.body).toEqual(SWEEP_BODY);
  });
});

describe("Client.sweep", () => {
  it("returns the synchronous result when the grid fits", async () => {
    const records = [okRecord(1e27, 0.99), okRecord(1e28, 0.9)];
    const { fetchFn, calls } = stubFetch({
      "/api/sweep": () => ({
        status: 200,
        payload: sweepResponse(records, records[1]!),
      }),
    });
    const out = await new Client("", fetchFn).sweep(SWEEP_BODY);
    expect(out.records).toEqual(records);
    expect(out.endpoint).toEqual(records[1]);
    expect(calls.every((c) => !c.url.includes("/api/jobs"))).toBe(true);
  });

  it("reroutes to the job API when the server says too-many-points", async () => {
    const records = [okRecord(1e27, 0.99), okRecord(1e28, 0.9), okRecord(1e29, 0.5)];
    const snapshots: JobResponse[] = [
      {
        schema_version: "trainlim-1",
        kind: "job",
        id: "j1",
        status: "running",
        progress: { completed: 1, total: 3 },
      },
      {
        schema_version: "trainlim-1",
        kind: "job",
        id: "j1",
        status: "running",
        progress: { completed: 2, total: 3 },
      },
      {
        schema_version: "trainlim-1",
        kind: "job",
        id: "j1",
        status: "done",
        progress: { completed: 3, total: 3 },
        records,
        endpoint: records[2]!,
        error: null,
      },
    ];
    const { fetchFn, calls } = stubFetch({
      "/api/sweep": () => ({
        status: 400,
        payload: { code: "too-many-points", message: "use the job API" },
      }),
      "/api/jobs/j1": (n) => ({
        status: 200,
        payload: snapshots[Math.min(n, snapshots.length - 1)]!,
      }),
      "/api/jobs": () => ({
        status: 202,
        payload: {
          schema_version: "trainlim-1",
          kind: "job",
          id: "j1",
          status: "running",
        },
      }),
    });
    const client = new Client("", fetchFn);
    client.pollMs = 1;
    const seen: SweepProgress[] = [];
    const out = await client.sweep(SWEEP_BODY, (p) => seen.push(p));

    expect(out.records).toEqual(records);
    expect(out.endpoint).toEqual(records[2]);
    expect(out.kind).toBe("sweep");
    // the job was created with the same body the sync endpoint rejected
    const createCall = calls.find(
      (c) => c.url.endsWith("/api/jobs") && c.method === "POST",
    );
    expect(createCall?.body).toEqual(SWEEP_BODY);
    // progress only ever moves forward
    expect(seen.length).toBeGreaterThan(0);
    for (let i = 1; i < seen.length; i++) {
      expect(seen[i]!.completed).toBeGreaterThanOrEqual(seen[i - 1]!.completed);
    }
    expect(seen.at(-1)).toEqual({ completed: 3, total: 3 });
  });

  it("surfaces a failed job as an ApiError", async () => {
    const { fetchFn } = stubFetch({
      "/api/sweep": () => ({
        status: 400,
        payload: { code: "too-many-points", message: "use the job API" },
      }),
      "/api/jobs/j2": () => ({
        status: 200,
        payload: {
          schema_version: "trainlim-1",
          kind: "job",
          id: "j2",
          status: "failed",
          error: "cancelled",
        },
      }),
      "/api/jobs": () => ({
        status: 202,
        payload: {
          schema_version: "trainlim-1",
          kind: "job",
          id: "j2",
          status: "running",
        },
      }),
    });
    const client = new Client("", fetchFn);
    client.pollMs = 1;
    const err = await client.sweep(SWEEP_BODY).then(() => null, (e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).body.code).toBe("job-failed");
    expect((err as ApiError).message).toContain("cancelled");
  });

  it("does not fall back to jobs on other errors", async () => {
    const { fetchFn, calls } = stubFetch({
      "/api/sweep": () => ({
        status: 422,
        payload: { code: "infeasible", message: "no feasible layout" },
      }),
    });
    const err = await new Client("", fetchFn)
      .sweep(SWEEP_BODY)
      .then(() => null, (e: unknown) => e);
    expect((err as ApiError).body.code).toBe("infeasible");
    expect(calls.every((c) => !c.url.includes("/api/jobs"))).toBe(true);
  });
});
