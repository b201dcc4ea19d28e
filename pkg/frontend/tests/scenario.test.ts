import { describe, expect, it } from "vitest";

import {
  applyOverrides,
  closedFormBody,
  clusterBody,
  defaultScenario,
  scenarioFromQuery,
  scenarioToQuery,
  sweepBody,
  validateScenario,
  type ScenarioState,
} from "../src/scenario.js";
import { clusterDoc } from "./fixtures.js";

const presets = new Map([["dgx-h100", clusterDoc()]]);

describe("validateScenario", () => {
  it("accepts the default scenario", () => {
    expect(validateScenario(defaultScenario())).toEqual({});
  });

  it("flags each broken field by name", () => {
    const s: ScenarioState = {
      ...defaultScenario(),
      preset: "",
      tMin: 0,
      perDecade: 2.5,
    };
    const errors = validateScenario(s);
    expect(Object.keys(errors).sort()).toEqual(["perDecade", "preset", "tMin"]);
  });

  it("rejects a sweep end below the start", () => {
    const errors = validateScenario({
      ...defaultScenario(),
      tMin: 1e28,
      tMax: 1e27,
    });
    expect(errors.tMax).toMatch(/>=/);
  });

  it("rejects non-positive durations and overrides", () => {
    const s = defaultScenario();
    s.durationS = 0;
    s.overrides.networkBandwidth = -1;
    s.overrides.networkLatency = NaN;
    const errors = validateScenario(s);
    expect(errors.durationS).toBeTruthy();
    expect(errors.networkBandwidth).toBeTruthy();
    expect(errors.networkLatency).toBeTruthy();
  });

  it("requires a whole number of GPUs per node", () => {
    const s = defaultScenario();
    s.overrides.nodeSize = 4.5;
    expect(validateScenario(s).nodeSize).toMatch(/whole number/);
  });

  it("rejects unknown law and mode choices", () => {
    const s = defaultScenario();
    (s as { laws: string }).laws = "cubic";
    (s as { mode: string }).mode = "turbo";
    const errors = validateScenario(s);
    expect(errors.laws).toBeTruthy();
    expect(errors.mode).toBeTruthy();
  });
});

describe("URL round trip", () => {
  it("restores every field, overrides and duration included", () => {
    const s: ScenarioState = {
      preset: "dgx-h100",
      overrides: {
        networkBandwidth: 2.25e12,
        networkLatency: 1.5e-8,
        sramCapacity: 1e9,
        nodeSize: 16,
      },
      laws: "deepseek",
      mode: "sparse",
      durationS: 2592000,
      tMin: 5e26,
      tMax: 2e30,
      perDecade: 8,
    };
    expect(scenarioFromQuery(scenarioToQuery(s))).toEqual(s);
  });

  it("round-trips the default scenario without spurious keys", () => {
    const s = defaultScenario();
    const q = scenarioToQuery(s);
    expect(q).not.toContain("duration");
    expect(q).not.toContain("netbw");
    expect(scenarioFromQuery(q)).toEqual(s);
  });

  it("falls back to defaults on unknown choice values", () => {
    const s = scenarioFromQuery("laws=bogus&mode=bogus&preset=v100-cluster");
    expect(s.laws).toBe("default");
    expect(s.mode).toBe("dense");
    expect(s.preset).toBe("v100-cluster");
  });

  it("parses an empty query as the default scenario", () => {
    expect(scenarioFromQuery("")).toEqual(defaultScenario());
  });
});

describe("applyOverrides", () => {
  it("substitutes values without touching the source document", () => {
    const doc = clusterDoc();
    const before = JSON.stringify(doc);
    const out = applyOverrides(doc, {
      networkBandwidth: 9e11,
      networkLatency: 3e-8,
      sramCapacity: 5e8,
      nodeSize: 32,
    });
    expect(JSON.stringify(doc)).toBe(before);
    expect(out.name).toBe("dgx-h100*");
    for (const level of out.network_levels) {
      expect(level.bandwidth).toEqual({ value: 9e11, unit: "words/s" });
      expect(level.one_way_latency_s).toBe(3e-8);
    }
    expect(out.memory_levels[1]!.capacity).toEqual({ value: 5e8, unit: "words" });
    expect(out.network_levels[0]!.group_size).toBe(32);
  });

  it("leaves untouched fields identical", () => {
    const out = applyOverrides(clusterDoc(), { nodeSize: 4 });
    expect(out.device).toEqual(clusterDoc().device);
    expect(out.memory_levels).toEqual(clusterDoc().memory_levels);
    expect(out.network_levels[1]!.bandwidth).toEqual(
      clusterDoc().network_levels[1]!.bandwidth,
    );
  });
});

describe("request bodies", () => {
  it("uses the preset name when nothing is overridden", () => {
    expect(clusterBody(defaultScenario(), presets)).toEqual({
      preset: "dgx-h100",
    });
  });

  it("inlines an edited spec when a field is overridden", () => {
    const s = defaultScenario();
    s.overrides.nodeSize = 16;
    const body = clusterBody(s, presets);
    expect("spec" in body && body.spec.name).toBe("dgx-h100*");
    expect("preset" in body).toBe(false);
  });

  it("refuses to build a spec for a preset it never fetched", () => {
    const s = defaultScenario();
    s.preset = "mystery";
    s.overrides.nodeSize = 16;
    expect(() => clusterBody(s, presets)).toThrow(/mystery/);
  });

  it("mirrors the sweep endpoint's field names", () => {
    const s = defaultScenario();
    s.durationS = 1000;
    expect(sweepBody(s, presets)).toEqual({
      preset: "dgx-h100",
      t_min_flop: 1e27,
      t_max_flop: 1e29,
      per_decade: 2,
      mode: "dense",
      laws: "default",
      duration_s: 1000,
    });
  });

  it("omits duration_s so the server default applies", () => {
    const body = sweepBody(defaultScenario(), presets);
    expect("duration_s" in body).toBe(false);
    const cf = closedFormBody(defaultScenario(), presets);
    expect(cf).toEqual({ preset: "dgx-h100" });
  });
});
