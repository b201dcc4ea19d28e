/** Scenario state: what the user is asking, serializable into a URL and
 *  convertible into API request bodies.  All numbers here are user inputs or
 *  copies of server-provided cluster documents — nothing is computed. */

import type { ClusterDoc, ClosedFormBody, SweepBody } from "./types.js";

export const LAW_CHOICES = ["default", "deepseek", "fixed-batch"] as const;
export const MODE_CHOICES = ["dense", "sparse"] as const;

/** Hardware what-if knobs: each one substitutes a user-entered value into a
 *  copy of the preset's cluster document. */
export interface Overrides {
  /** Per-GPU injection bandwidth, words/s, applied to every network level. */
  networkBandwidth?: number;
  /** One-way hop latency, seconds, applied to every network level. */
  networkLatency?: number;
  /** Capacity of the largest on-chip memory level, words. */
  sramCapacity?: number;
  /** Group size of the innermost network level (GPUs per node). */
  nodeSize?: number;
}

export interface ScenarioState {
  preset: string;
  overrides: Overrides;
  laws: (typeof LAW_CHOICES)[number];
  mode: (typeof MODE_CHOICES)[number];
  /** Training window in seconds; undefined = server default (three months). */
  durationS?: number;
  tMin: number;
  tMax: number;
  perDecade: number;
}

export function defaultScenario(): ScenarioState {
  return {
    preset: "dgx-h100",
    overrides: {},
    laws: "default",
    mode: "dense",
    tMin: 1e27,
    tMax: 1e29,
    perDecade: 2,
  };
}

const OVERRIDE_KEYS: (keyof Overrides)[] = [
  "networkBandwidth",
  "networkLatency",
  "sramCapacity",
  "nodeSize",
];

/** Field-keyed validation messages; empty object means submittable. */
export function validateScenario(s: ScenarioState): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!s.preset) errors.preset = "pick a cluster preset";
  if (!LAW_CHOICES.includes(s.laws)) errors.laws = "unknown scaling laws";
  if (!MODE_CHOICES.includes(s.mode)) errors.mode = "mode is dense or sparse";
  if (!(s.tMin > 0)) errors.tMin = "sweep start must be positive";
  if (!(s.tMax >= s.tMin)) errors.tMax = "sweep end must be >= start";
  if (!(Number.isInteger(s.perDecade) && s.perDecade >= 1)) {
    errors.perDecade = "points per decade must be a positive integer";
  }
  if (s.durationS !== undefined && !(s.durationS > 0)) {
    errors.durationS = "duration must be positive";
  }
  for (const key of OVERRIDE_KEYS) {
    const v = s.overrides[key];
    if (v === undefined) continue;
    if (!(typeof v === "number" && isFinite(v) && v > 0)) {
      errors[key] = "must be a positive number";
    } else if (key === "nodeSize" && !Number.isInteger(v)) {
      errors[key] = "must be a whole number of GPUs";
    }
  }
  return errors;
}

/** Substitute the override values into a copy of a preset's cluster document.
 *  Pure structural editing: values are replaced, never derived. */
export function applyOverrides(doc: ClusterDoc, o: Overrides): ClusterDoc {
  const spec: ClusterDoc = JSON.parse(JSON.stringify(doc));
  if (o.networkBandwidth !== undefined) {
    for (const level of spec.network_levels) {
      level.bandwidth = { value: o.networkBandwidth, unit: "words/s" };
    }
  }
  if (o.networkLatency !== undefined) {
    for (const level of spec.network_levels) {
      level.one_way_latency_s = o.networkLatency;
    }
  }
  if (o.sramCapacity !== undefined && spec.memory_levels.length > 1) {
    spec.memory_levels[1]!.capacity = { value: o.sramCapacity, unit: "words" };
  }
  if (o.nodeSize !== undefined && spec.network_levels.length > 0) {
    spec.network_levels[0]!.group_size = o.nodeSize;
  }
  if (Object.keys(o).length > 0) spec.name = `${spec.name}*`;
  return spec;
}

function hasOverrides(s: ScenarioState): boolean {
  return OVERRIDE_KEYS.some((k) => s.overrides[k] !== undefined);
}

/** Cluster half of a request body: preset name, or an inline spec when the
 *  scenario overrides preset fields.  `presets` comes from GET /api/presets. */
export function clusterBody(
  s: ScenarioState,
  presets: Map<string, ClusterDoc>,
): { preset: string } | { spec: ClusterDoc } {
  if (!hasOverrides(s)) return { preset: s.preset };
  const doc = presets.get(s.preset);
  if (!doc) throw new Error(`preset ${s.preset} not in the fetched list`);
  return { spec: applyOverrides(doc, s.overrides) };
}

export function sweepBody(
  s: ScenarioState,
  presets: Map<string, ClusterDoc>,
): SweepBody {
  const body: SweepBody = {
    ...clusterBody(s, presets),
    t_min_flop: s.tMin,
    t_max_flop: s.tMax,
    per_decade: s.perDecade,
    mode: s.mode,
    laws: s.laws,
  };
  if (s.durationS !== undefined) body.duration_s = s.durationS;
  return body;
}

export function closedFormBody(
  s: ScenarioState,
  presets: Map<string, ClusterDoc>,
): ClosedFormBody {
  const body: ClosedFormBody = { ...clusterBody(s, presets) };
  if (s.durationS !== undefined) body.duration_s = s.durationS;
  return body;
}

/** URL round-trip, so scenarios are shareable links. */

export function scenarioToQuery(s: ScenarioState): string {
  const q = new URLSearchParams();
  q.set("preset", s.preset);
  q.set("laws", s.laws);
  q.set("mode", s.mode);
  q.set("tmin", String(s.tMin));
  q.set("tmax", String(s.tMax));
  q.set("perdec", String(s.perDecade));
  if (s.durationS !== undefined) q.set("duration", String(s.durationS));
  if (s.overrides.networkBandwidth !== undefined) {
    q.set("netbw", String(s.overrides.networkBandwidth));
  }
  if (s.overrides.networkLatency !== undefined) {
    q.set("netlat", String(s.overrides.networkLatency));
  }
  if (s.overrides.sramCapacity !== undefined) {
    q.set("sram", String(s.overrides.sramCapacity));
  }
  if (s.overrides.nodeSize !== undefined) {
    q.set("node", String(s.overrides.nodeSize));
  }
  return q.toString();
}

export function scenarioFromQuery(query: string): ScenarioState {
  const q = new URLSearchParams(query);
  const s = defaultScenario();
  const str = (key: string) => q.get(key);
  const num = (key: string) => {
    const raw = q.get(key);
    return raw === null ? undefined : Number(raw);
  };
  if (str("preset")) s.preset = str("preset")!;
  const laws = str("laws");
  if (laws && (LAW_CHOICES as readonly string[]).includes(laws)) {
    s.laws = laws as ScenarioState["laws"];
  }
  const mode = str("mode");
  if (mode && (MODE_CHOICES as readonly string[]).includes(mode)) {
    s.mode = mode as ScenarioState["mode"];
  }
  if (num("tmin") !== undefined) s.tMin = num("tmin")!;
  if (num("tmax") !== undefined) s.tMax = num("tmax")!;
  if (num("perdec") !== undefined) s.perDecade = num("perdec")!;
  if (num("duration") !== undefined) s.durationS = num("duration");
  if (num("netbw") !== undefined) s.overrides.networkBandwidth = num("netbw");
  if (num("netlat") !== undefined) s.overrides.networkLatency = num("netlat");
  if (num("sram") !== undefined) s.overrides.sramCapacity = num("sram");
  if (num("node") !== undefined) s.overrides.nodeSize = num("node");
  return s;
}
