/** Response and request shapes of the trainlim HTTP API (schema trainlim-1). */

export interface Quantity {
  value: number | string; // "inf" for unbounded
  unit: string;
  direction?: string;
}

export interface MemoryLevelDoc {
  name: string;
  capacity: Quantity;
  bandwidth: Quantity;
  access_latency_s: number;
}

export interface NetworkLevelDoc {
  group_size: number | "unbounded";
  bandwidth: Quantity;
  one_way_latency_s: number;
}

export interface ClusterDoc {
  name: string;
  device: {
    name?: string;
    peak_arithmetic: Quantity;
    sustained_clock_factor: number;
    kernel_latency_s: number;
    word_size_bytes: number;
    sm_tile: [number, number];
    warp_tile: [number, number];
  };
  memory_levels: MemoryLevelDoc[];
  network_levels: NetworkLevelDoc[];
}

export interface PresetsResponse {
  schema_version: string;
  kind: "presets";
  presets: { name: string; spec: ClusterDoc }[];
}

/** One sweep/simulate/search record; null everywhere but t_flop/status/message
 *  when the point failed. */
export interface PointRecord {
  t_flop: number;
  status: "ok" | "cap-exceeded" | "latency-wall" | "infeasible";
  n_gpu: number | null;
  mfu: number | null;
  norm_util: number | null;
  n_dp: number | null;
  n_tp_ff: number | null;
  n_tp_model: number | null;
  n_pp: number | null;
  n_ep: number | null;
  interleave: number | null;
  microbatches: number | null;
  schedule: string | null;
  t_step_s: number | null;
  t_matmul_s: number | null;
  t_comm_exposed_s: number | null;
  t_latency_s: number | null;
  bubble_fraction: number | null;
  log_fractions: {
    dp: number;
    tp_ff: number;
    tp_model: number;
    pp: number;
    ep: number;
  } | null;
  message: string;
}

export interface SweepResponse {
  schema_version: string;
  kind: "sweep";
  units: Record<string, string>;
  records: PointRecord[];
  endpoint: PointRecord | null;
}

export interface PointResponse {
  schema_version: string;
  kind: "simulate" | "search";
  units: Record<string, string>;
  record: PointRecord;
}

export interface ClosedFormResponse {
  schema_version: string;
  kind: "closed-form";
  units: Record<string, string>;
  cluster: string;
  batch: number;
  layers: number;
  experts: number;
  t_train_s: number;
  alpha: number;
  d_prime: number | null;
  b_prime: number | null;
  sram_regime: boolean;
  n_critical_nodes: number | null;
  t_critical_bandwidth_flop: number | null;
  t_critical_latency_flop: number | null;
  t_limit_flop: number | null;
  n_p_limit: number | null;
  operative_limit_flop: number | null;
  unbounded_fields: string[];
}

export interface JobResponse {
  schema_version: string;
  kind: "job";
  id: string;
  status: "queued" | "running" | "done" | "failed";
  progress?: { completed: number; total: number };
  records?: PointRecord[];
  endpoint?: PointRecord | null;
  error?: string | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
  violated_invariant?: string;
}

/** Request bodies. */

export interface ShapeBody {
  d_model: number;
  d_ff: number;
  n_layers: number;
  batch: number;
  experts?: number;
}

export interface SweepBody {
  preset?: string;
  spec?: ClusterDoc;
  t_min_flop: number;
  t_max_flop: number;
  per_decade?: number;
  mode?: string;
  laws?: string;
  duration_s?: number;
  gpu_cap?: number;
  dp_overlap?: number;
}

export interface ClosedFormBody {
  preset?: string;
  spec?: ClusterDoc;
  batch?: number;
  layers?: number;
  sparsity?: number;
  duration_s?: number;
  alpha?: number;
}
