/** Shared fixtures for the unit tests: a minimal cluster document and
 *  hand-built sweep records shaped like real API responses. */

import type {
  ClosedFormResponse,
  ClusterDoc,
  PointRecord,
  SweepResponse,
} from "../src/types.js";

export function clusterDoc(name = "dgx-h100"): ClusterDoc {
  return {
    name,
    device: {
      peak_arithmetic: { value: 4.945e14, unit: "mac/s" },
      sustained_clock_factor: 0.85,
      kernel_latency_s: 2.5e-6,
      word_size_bytes: 2,
      sm_tile: [128, 128],
      warp_tile: [64, 64],
    },
    memory_levels: [
      {
        name: "hbm",
        capacity: { value: 4e10, unit: "words" },
        bandwidth: { value: 1.675e12, unit: "words/s" },
        access_latency_s: 1e-6,
      },
      {
        name: "sram",
        capacity: { value: 2.5e7, unit: "words" },
        bandwidth: { value: 5e13, unit: "words/s" },
        access_latency_s: 1e-7,
      },
    ],
    network_levels: [
      {
        group_size: 8,
        bandwidth: { value: 2.25e11, unit: "words/s" },
        one_way_latency_s: 2.25e-7,
      },
      {
        group_size: "unbounded",
        bandwidth: { value: 2.5e10, unit: "words/s" },
        one_way_latency_s: 2.5e-6,
      },
    ],
  };
}

/** Fractions chosen to sum to exactly 1 in floating point. */
export const CLEAN_FRACTIONS = {
  dp: 0.5,
  tp_ff: 0.25,
  tp_model: 0.125,
  pp: 0.0625,
  ep: 0.0625,
};

export function okRecord(
  t: number,
  util: number,
  fractions: PointRecord["log_fractions"] = CLEAN_FRACTIONS,
): PointRecord {
  return {
    t_flop: t,
    status: "ok",
    n_gpu: 1024,
    mfu: util * 0.98,
    norm_util: util,
    n_dp: 16,
    n_tp_ff: 8,
    n_tp_model: 4,
    n_pp: 2,
    n_ep: 1,
    interleave: 1,
    microbatches: 16,
    schedule: "interleaved",
    t_step_s: 0.5,
    t_matmul_s: 0.4,
    t_comm_exposed_s: 0.05,
    t_latency_s: 0.02,
    bubble_fraction: 0.06,
    log_fractions: fractions,
    message: "1024 GPUs",
  };
}

export function failedRecord(
  t: number,
  status: PointRecord["status"] = "latency-wall",
): PointRecord {
  return {
    t_flop: t,
    status,
    n_gpu: null,
    mfu: null,
    norm_util: null,
    n_dp: null,
    n_tp_ff: null,
    n_tp_model: null,
    n_pp: null,
    n_ep: null,
    interleave: null,
    microbatches: null,
    schedule: null,
    t_step_s: null,
    t_matmul_s: null,
    t_comm_exposed_s: null,
    t_latency_s: null,
    bubble_fraction: null,
    log_fractions: null,
    message: "latency exceeds the step budget",
  };
}

export function sweepResponse(
  records: PointRecord[],
  endpoint: PointRecord | null = null,
): SweepResponse {
  return {
    schema_version: "trainlim-1",
    kind: "sweep",
    units: { t_flop: "flop" },
    records,
    endpoint,
  };
}

export function closedFormResponse(
  overrides: Partial<ClosedFormResponse> = {},
): ClosedFormResponse {
  return {
    schema_version: "trainlim-1",
    kind: "closed-form",
    units: { t_limit_flop: "flop" },
    cluster: "dgx-h100",
    batch: 4e6,
    layers: 100,
    experts: 1,
    t_train_s: 7776000,
    alpha: 0,
    d_prime: 26400,
    b_prime: 591.044776119403,
    sram_regime: false,
    n_critical_nodes: 306853.75,
    t_critical_bandwidth_flop: 1.9173464545065018e28,
    t_critical_latency_flop: 2.5614252e30,
    t_limit_flop: 2.30528268e31,
    n_p_limit: 4.383e14,
    operative_limit_flop: 1.9173464545065018e28,
    unbounded_fields: [],
    ...overrides,
  };
}
