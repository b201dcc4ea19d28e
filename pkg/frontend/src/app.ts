/** Browser wiring: form controls <-> ScenarioState <-> URL hash, two panels
 *  (explore + compare), charts injected as SVG strings. */

import { Client } from "./api.js";
import {
  renderCompareView,
  renderParallelismView,
  renderSweepView,
} from "./chart.js";
import { debounce, SweepPanel, type PanelResult } from "./panel.js";
import {
  defaultScenario,
  LAW_CHOICES,
  MODE_CHOICES,
  scenarioFromQuery,
  scenarioToQuery,
  validateScenario,
  type ScenarioState,
} from "./scenario.js";
import type { ClusterDoc } from "./types.js";

const REFRESH_DELAY_MS = 350;

// Same-origin by default; a static host serving this bundle next to a
// separately running API passes ?api=http://host:port (CORS-enabled there).
const client = new Client(
  new URLSearchParams(location.search).get("api") ?? "",
);
let presets = new Map<string, ClusterDoc>();
let state: ScenarioState = defaultScenario();
let compareState: ScenarioState | null = null;
let lastResult: PanelResult | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function readForm(): ScenarioState {
  const s = defaultScenario();
  s.preset = el<HTMLSelectElement>("preset").value;
  s.laws = el<HTMLSelectElement>("laws").value as ScenarioState["laws"];
  s.mode = el<HTMLSelectElement>("mode").value as ScenarioState["mode"];
  s.tMin = Number(el<HTMLInputElement>("tmin").value);
  s.tMax = Number(el<HTMLInputElement>("tmax").value);
  s.perDecade = Number(el<HTMLInputElement>("perdec").value);
  const duration = el<HTMLInputElement>("duration").value.trim();
  if (duration) s.durationS = Number(duration);
  const overrideInputs: [keyof ScenarioState["overrides"], string][] = [
    ["networkBandwidth", "netbw"],
    ["networkLatency", "netlat"],
    ["sramCapacity", "sram"],
    ["nodeSize", "node"],
  ];
  for (const [key, id] of overrideInputs) {
    const raw = el<HTMLInputElement>(id).value.trim();
    if (raw) s.overrides[key] = Number(raw);
  }
  return s;
}

function writeForm(s: ScenarioState): void {
  el<HTMLSelectElement>("preset").value = s.preset;
  el<HTMLSelectElement>("laws").value = s.laws;
  el<HTMLSelectElement>("mode").value = s.mode;
  el<HTMLInputElement>("tmin").value = String(s.tMin);
  el<HTMLInputElement>("tmax").value = String(s.tMax);
  el<HTMLInputElement>("perdec").value = String(s.perDecade);
  el<HTMLInputElement>("duration").value =
    s.durationS === undefined ? "" : String(s.durationS);
  el<HTMLInputElement>("netbw").value =
    s.overrides.networkBandwidth === undefined
      ? ""
      : String(s.overrides.networkBandwidth);
  el<HTMLInputElement>("netlat").value =
    s.overrides.networkLatency === undefined
      ? ""
      : String(s.overrides.networkLatency);
  el<HTMLInputElement>("sram").value =
    s.overrides.sramCapacity === undefined
      ? ""
      : String(s.overrides.sramCapacity);
  el<HTMLInputElement>("node").value =
    s.overrides.nodeSize === undefined ? "" : String(s.overrides.nodeSize);
}

function markInvalid(errors: Record<string, string>): void {
  const ids = [
    "preset", "laws", "mode", "tmin", "tmax", "perdec", "duration",
    "netbw", "netlat", "sram", "node",
  ];
  const byField: Record<string, string> = {
    preset: "preset", laws: "laws", mode: "mode", tMin: "tmin", tMax: "tmax",
    perDecade: "perdec", durationS: "duration", networkBandwidth: "netbw",
    networkLatency: "netlat", sramCapacity: "sram", nodeSize: "node",
  };
  for (const id of ids) {
    el(id).classList.remove("invalid");
    el(id).title = "";
  }
  for (const [field, message] of Object.entries(errors)) {
    const id = byField[field];
    if (!id) continue;
    el(id).classList.add("invalid");
    el(id).title = message;
  }
}

const panel = new SweepPanel(client, {
  onResult(result) {
    lastResult = result;
    el("sweep-chart").innerHTML = renderSweepView(result.sweep, result.closedForm);
    el("fractions-chart").innerHTML = renderParallelismView(result.sweep);
    el("status").textContent = "";
  },
  onError(message) {
    el("status").textContent = message;
  },
  onProgress(p) {
    const bar = el<HTMLProgressElement>("progress");
    if (p === null) {
      bar.hidden = true;
      return;
    }
    bar.hidden = false;
    bar.max = p.total;
    bar.value = p.completed;
  },
  onBusy(busy) {
    const status = el("status");
    if (busy) status.textContent = "running...";
    // only clear our own note — onError's message must survive the finally
    else if (status.textContent === "running...") status.textContent = "";
  },
});

const comparePanel = new SweepPanel(client, {
  onResult(result) {
    if (!lastResult) return;
    el("compare-chart").innerHTML = renderCompareView(
      { label: state.preset, sweep: lastResult.sweep },
      { label: compareLabel(), sweep: result.sweep },
    );
  },
  onError(message) {
    if (!lastResult) return;
    el("compare-chart").innerHTML = renderCompareView(
      { label: state.preset, sweep: lastResult.sweep },
      { label: compareLabel(), error: message },
    );
  },
});

function compareLabel(): string {
  return compareState ? compareState.preset : "";
}

const scheduleRefresh = debounce(() => {
  state = readForm();
  const errors = validateScenario(state);
  markInvalid(errors);
  if (Object.keys(errors).length) return;
  location.hash = scenarioToQuery(state);
  void panel.refresh(state, presets);
  if (compareState) void comparePanel.refresh(compareState, presets);
}, REFRESH_DELAY_MS);

function fillSelectors(): void {
  const presetSel = el<HTMLSelectElement>("preset");
  presetSel.innerHTML = "";
  for (const name of presets.keys()) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    presetSel.appendChild(opt);
  }
  const compareSel = el<HTMLSelectElement>("compare-preset");
  compareSel.innerHTML = "<option value=''>(off)</option>";
  for (const name of presets.keys()) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    compareSel.appendChild(opt);
  }
  for (const choice of LAW_CHOICES) {
    const opt = document.createElement("option");
    opt.value = choice;
    opt.textContent = choice;
    el<HTMLSelectElement>("laws").appendChild(opt);
  }
  for (const choice of MODE_CHOICES) {
    const opt = document.createElement("option");
    opt.value = choice;
    opt.textContent = choice;
    el<HTMLSelectElement>("mode").appendChild(opt);
  }
}

async function main(): Promise<void> {
  presets = await client.presets();
  fillSelectors();
  if (location.hash.length > 1) {
    state = scenarioFromQuery(location.hash.slice(1));
  }
  writeForm(state);
  for (const id of [
    "preset", "laws", "mode", "tmin", "tmax", "perdec", "duration",
    "netbw", "netlat", "sram", "node",
  ]) {
    el(id).addEventListener("input", scheduleRefresh);
  }
  el("compare-preset").addEventListener("input", () => {
    const choice = el<HTMLSelectElement>("compare-preset").value;
    compareState = choice ? { ...state, overrides: {}, preset: choice } : null;
    el("compare-chart").innerHTML = "";
    if (compareState) void comparePanel.refresh(compareState, presets);
  });
  scheduleRefresh();
  scheduleRefresh.flush();
}

main().catch((err) => {
  el("status").textContent = `failed to reach the API: ${err}`;
});
