/** SVG chart builders.  Pure string generation, no DOM.
 *
 *  Every number shown to the user is carried verbatim from an API response:
 *  such text nodes have class="val" and a data-value attribute holding the
 *  raw value as received.  Fixed scale furniture (the 0%/50%/80%/100%
 *  gridline labels) has class="furniture" and contains no model output.
 *  Nothing here computes a model quantity; the only arithmetic is pixel
 *  projection and the order-of-magnitude difference of two server-reported
 *  endpoints in the comparison legend.
 */

import type { ClosedFormResponse, PointRecord, SweepResponse } from "./types.js";

export const WIDTH = 760;
export const HEIGHT = 380;
export const MARGIN = { left: 70, right: 24, top: 28, bottom: 46 };
export const THRESHOLD = 0.8; // endpoint rule shown as the dashed guide line

export const FRACTION_COLORS: Record<string, string> = {
  dp: "#4e79a7",
  tp_ff: "#f28e2b",
  tp_model: "#e15759",
  pp: "#76b7b4",
  ep: "#59a14f",
};
const FRACTION_ORDER = ["dp", "tp_ff", "tp_model", "pp", "ep"] as const;

const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Short display form of a server-provided number (display only — the raw
 *  value always rides along in data-value). */
export function fmt(x: number): string {
  if (x === 0) return "0";
  const abs = Math.abs(x);
  if (abs >= 1e5 || abs < 1e-3) return x.toExponential(2);
  return String(Math.round(x * 1000) / 1000);
}

/** A displayed number with provenance: raw API value in data-value. */
function val(x: number, cssClass = "val"): string {
  return `class="${cssClass} val" data-value="${esc(String(x))}"`;
}

interface LogScale {
  (t: number): number;
  min: number;
  max: number;
}

function logScale(ts: number[]): LogScale {
  const lo = Math.log10(Math.min(...ts));
  const hi = Math.log10(Math.max(...ts));
  const span = hi > lo ? hi - lo : 1;
  const f = ((t: number) =>
    MARGIN.left + ((Math.log10(t) - lo) / span) * PLOT_W) as LogScale;
  f.min = lo;
  f.max = hi;
  return f;
}

function yUtil(u: number): number {
  return MARGIN.top + (1 - Math.max(0, Math.min(1, u))) * PLOT_H;
}

export function placeholder(text: string): string {
  return `<div class="placeholder">${esc(text)}</div>`;
}

function hoverTitle(r: PointRecord): string {
  if (r.status !== "ok") return `${r.status}: ${r.message}`;
  const degrees =
    `dp=${r.n_dp} tp_ff=${r.n_tp_ff} tp_model=${r.n_tp_model} ` +
    `pp=${r.n_pp} ep=${r.n_ep} (i=${r.interleave}, m=${r.microbatches}, ` +
    `${r.schedule})`;
  const times =
    `t_step=${fmt(r.t_step_s!)}s: matmul ${fmt(r.t_matmul_s!)}s, ` +
    `comm exposed ${fmt(r.t_comm_exposed_s!)}s, ` +
    `latency ${fmt(r.t_latency_s!)}s, bubble ${fmt(r.bubble_fraction!)}`;
  return (
    `T=${fmt(r.t_flop)} FLOP  n_gpu=${r.n_gpu}  ` +
    `util=${fmt(r.norm_util!)}  MFU=${fmt(r.mfu!)}\n${degrees}\n${times}`
  );
}

function axisFrame(x: LogScale, ts: number[]): string {
  let s = `<g class="axes">`;
  // y gridlines: fixed utilization references, no model numbers
  for (const [u, label] of [
    [0, "0%"],
    [0.5, "50%"],
    [1, "100%"],
  ] as [number, string][]) {
    const y = yUtil(u);
    s += `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" class="grid"/>`;
    s += `<text x="${MARGIN.left - 8}" y="${y + 4}" text-anchor="end" class="furniture">${label}</text>`;
  }
  const yThr = yUtil(THRESHOLD);
  s += `<line x1="${MARGIN.left}" y1="${yThr}" x2="${WIDTH - MARGIN.right}" y2="${yThr}" class="threshold"/>`;
  s += `<text x="${MARGIN.left - 8}" y="${yThr + 4}" text-anchor="end" class="furniture threshold-label">80%</text>`;
  // x ticks at the swept budgets themselves — server numbers, thinned to fit
  const step = Math.max(1, Math.ceil(ts.length / 8));
  for (let i = 0; i < ts.length; i += step) {
    const t = ts[i]!;
    const px = x(t);
    s += `<line x1="${px}" y1="${HEIGHT - MARGIN.bottom}" x2="${px}" y2="${HEIGHT - MARGIN.bottom + 5}" class="grid"/>`;
    s += `<text x="${px}" y="${HEIGHT - MARGIN.bottom + 20}" text-anchor="middle" ${val(t, "tick")}>${fmt(t)}</text>`;
  }
  s += `<text x="${MARGIN.left + PLOT_W / 2}" y="${HEIGHT - 6}" text-anchor="middle" class="furniture">training compute (FLOP, log)</text>`;
  s += `<text transform="rotate(-90 16 ${MARGIN.top + PLOT_H / 2})" x="16" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" class="furniture">normalized utilization</text>`;
  s += `</g>`;
  return s;
}

function curve(records: PointRecord[], x: LogScale, cssClass: string): string {
  const ok = records.filter((r) => r.status === "ok" && r.norm_util !== null);
  let s = "";
  if (ok.length > 1) {
    const pts = ok.map((r) => `${x(r.t_flop)},${yUtil(r.norm_util!)}`).join(" ");
    s += `<polyline points="${pts}" class="curve ${cssClass}"/>`;
  }
  for (const r of records) {
    const px = x(r.t_flop);
    if (r.status === "ok" && r.norm_util !== null) {
      s += `<circle cx="${px}" cy="${yUtil(r.norm_util)}" r="4" class="point ${cssClass}" data-t="${esc(String(r.t_flop))}">`;
      s += `<title>${esc(hoverTitle(r))}</title></circle>`;
    } else {
      // infeasible budget: ✕ on the axis
      const y = HEIGHT - MARGIN.bottom;
      s += `<g class="failed ${cssClass}" data-t="${esc(String(r.t_flop))}">`;
      s += `<path d="M ${px - 4} ${y - 4} L ${px + 4} ${y + 4} M ${px - 4} ${y + 4} L ${px + 4} ${y - 4}" class="failed-mark"/>`;
      s += `<title>${esc(hoverTitle(r))}</title></g>`;
    }
  }
  return s;
}

function vline(
  t: number,
  x: LogScale,
  cssClass: string,
  label: string,
  labelY: number,
): string {
  const lo = Math.pow(10, x.min);
  const hi = Math.pow(10, x.max);
  if (!(t >= lo && t <= hi)) return "";
  const px = x(t);
  let s = `<g class="${cssClass}">`;
  s += `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${HEIGHT - MARGIN.bottom}" class="vline"/>`;
  s += `<text x="${px + 4}" y="${labelY}" class="furniture">${esc(label)}</text>`;
  s += `<text x="${px + 4}" y="${labelY + 13}" ${val(t)}>${fmt(t)}</text>`;
  s += `</g>`;
  return s;
}

/** Normalized utilization vs training compute, with the 80% rule, the sweep
 *  endpoint, and the closed-form ceilings overlaid. */
export function renderSweepView(
  sweep: Pick<SweepResponse, "records" | "endpoint">,
  closedForm: ClosedFormResponse | null = null,
): string {
  const records = sweep.records;
  if (!records.length) return placeholder("no sweep points — adjust the range and run");
  const ts = records.map((r) => r.t_flop);
  const x = logScale(ts);

  let s = `<svg class="sweep-view" viewBox="0 0 ${WIDTH} ${HEIGHT}" xmlns="http://www.w3.org/2000/svg">`;
  s += axisFrame(x, ts);

  if (closedForm) {
    if (closedForm.t_critical_bandwidth_flop !== null) {
      s += vline(closedForm.t_critical_bandwidth_flop, x, "cliff cliff-bw",
        "bandwidth ceiling", MARGIN.top + 14);
    }
    if (closedForm.t_limit_flop !== null) {
      s += vline(closedForm.t_limit_flop, x, "cliff cliff-wall",
        "latency wall", MARGIN.top + 44);
    }
  }

  s += curve(records, x, "primary");

  if (sweep.endpoint) {
    const e = sweep.endpoint;
    const px = x(e.t_flop);
    const py = e.status === "ok" && e.norm_util !== null
      ? yUtil(e.norm_util)
      : HEIGHT - MARGIN.bottom;
    s += `<g class="endpoint" data-t="${esc(String(e.t_flop))}">`;
    s += `<path d="M ${px} ${py - 7} L ${px + 7} ${py} L ${px} ${py + 7} L ${px - 7} ${py} Z" class="endpoint-mark"/>`;
    s += `<text x="${px}" y="${py - 12}" text-anchor="middle" ${val(e.t_flop, "endpoint-label")}>${fmt(e.t_flop)}</text>`;
    s += `<title>${esc("scaling endpoint\n" + hoverTitle(e))}</title>`;
    s += `</g>`;
  }

  s += `</svg>`;
  return s;
}

/** Stacked bars of the five parallelism log-fractions per sweep point.
 *  Fractions are drawn exactly as the API reports them; a stack reaches the
 *  top of the plot exactly when they sum to 1 (single-GPU points are all
 *  zero and draw no bar). */
export function renderParallelismView(
  sweep: Pick<SweepResponse, "records">,
): string {
  const records = sweep.records;
  if (!records.length) return placeholder("no sweep points — adjust the range and run");
  const ts = records.map((r) => r.t_flop);
  const x = logScale(ts);
  const slot = records.length > 1 ? PLOT_W / (records.length * 1.6) : 40;
  const barW = Math.max(6, Math.min(34, slot));

  let s = `<svg class="parallelism-view" viewBox="0 0 ${WIDTH} ${HEIGHT}" xmlns="http://www.w3.org/2000/svg">`;
  // frame: 0 and 1 reference lines
  for (const [u, label] of [
    [0, "0"],
    [1, "1"],
  ] as [number, string][]) {
    const y = yUtil(u);
    s += `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" class="grid"/>`;
    s += `<text x="${MARGIN.left - 8}" y="${y + 4}" text-anchor="end" class="furniture">${label}</text>`;
  }
  const step = Math.max(1, Math.ceil(records.length / 8));
  for (let i = 0; i < records.length; i += step) {
    const t = records[i]!.t_flop;
    s += `<text x="${x(t)}" y="${HEIGHT - MARGIN.bottom + 20}" text-anchor="middle" ${val(t, "tick")}>${fmt(t)}</text>`;
  }
  s += `<text x="${MARGIN.left + PLOT_W / 2}" y="${HEIGHT - 6}" text-anchor="middle" class="furniture">training compute (FLOP, log)</text>`;
  s += `<text transform="rotate(-90 16 ${MARGIN.top + PLOT_H / 2})" x="16" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" class="furniture">fraction of parallelism (log)</text>`;

  for (const r of records) {
    if (r.status !== "ok" || !r.log_fractions) continue;
    const px = x(r.t_flop) - barW / 2;
    let cum = 0;
    let bar = `<g class="stack" data-t="${esc(String(r.t_flop))}">`;
    for (const dim of FRACTION_ORDER) {
      const frac = r.log_fractions[dim];
      const y0 = yUtil(cum + frac);
      const h = yUtil(cum) - y0;
      if (h > 0) {
        bar += `<rect x="${px}" y="${y0}" width="${barW}" height="${h}" fill="${FRACTION_COLORS[dim]}" class="frac frac-${dim}" data-dim="${dim}" data-value="${esc(String(frac))}">`;
        bar += `<title>${esc(`${dim}: ${fmt(frac)} of parallelism at T=${fmt(r.t_flop)}`)}</title></rect>`;
      } else {
        // zero-height segment still records its fraction for inspection
        bar += `<rect x="${px}" y="${y0}" width="${barW}" height="0" fill="${FRACTION_COLORS[dim]}" class="frac frac-${dim}" data-dim="${dim}" data-value="${esc(String(frac))}"/>`;
      }
      cum += frac;
    }
    bar += `</g>`;
    s += bar;
  }

  // legend
  let lx = MARGIN.left;
  for (const dim of FRACTION_ORDER) {
    s += `<rect x="${lx}" y="8" width="10" height="10" fill="${FRACTION_COLORS[dim]}"/>`;
    s += `<text x="${lx + 14}" y="17" class="furniture">${dim}</text>`;
    lx += 14 + dim.length * 8 + 18;
  }

  s += `</svg>`;
  return s;
}

/** Order-of-magnitude gap between two server-reported endpoint budgets —
 *  the one presentation-side difference the comparison legend shows. */
export function oomDelta(a: number, b: number): number {
  return Math.log10(b) - Math.log10(a);
}

export interface CompareSide {
  label: string;
  sweep?: Pick<SweepResponse, "records" | "endpoint">;
  error?: string;
}

/** Side-by-side what-if overlay.  A side that failed renders as an error
 *  chip while the healthy side still draws. */
export function renderCompareView(a: CompareSide, b: CompareSide): string {
  const sides = [
    { ...a, cssClass: "primary" },
    { ...b, cssClass: "secondary" },
  ];
  const good = sides.filter((s) => s.sweep && s.sweep.records.length);
  if (!good.length) {
    return (
      placeholder("no comparable sweeps") +
      sides
        .filter((s) => s.error)
        .map((s) => `<div class="error-chip">${esc(s.label)}: ${esc(s.error!)}</div>`)
        .join("")
    );
  }

  const ts = good.flatMap((s) => s.sweep!.records.map((r) => r.t_flop));
  const x = logScale(ts);

  let out = "";
  for (const side of sides) {
    if (side.error) {
      out += `<div class="error-chip">${esc(side.label)}: ${esc(side.error)}</div>`;
    }
  }

  let s = `<svg class="compare-view" viewBox="0 0 ${WIDTH} ${HEIGHT}" xmlns="http://www.w3.org/2000/svg">`;
  s += axisFrame(x, [...new Set(ts)].sort((p, q) => p - q));
  for (const side of good) {
    s += curve(side.sweep!.records, x, side.cssClass);
    const e = side.sweep!.endpoint;
    if (e) {
      const px = x(e.t_flop);
      const py = e.status === "ok" && e.norm_util !== null
        ? yUtil(e.norm_util)
        : HEIGHT - MARGIN.bottom;
      s += `<g class="endpoint ${side.cssClass}" data-t="${esc(String(e.t_flop))}">`;
      s += `<path d="M ${px} ${py - 7} L ${px + 7} ${py} L ${px} ${py + 7} L ${px - 7} ${py} Z" class="endpoint-mark"/>`;
      s += `<text x="${px}" y="${py - 12}" text-anchor="middle" ${val(e.t_flop, "endpoint-label")}>${fmt(e.t_flop)}</text>`;
      s += `<title>${esc(side.label + " endpoint\n" + hoverTitle(e))}</title></g>`;
    }
  }
  s += `</svg>`;

  // legend with endpoint delta
  let legend = `<div class="compare-legend">`;
  for (const side of good) {
    const e = side.sweep!.endpoint;
    legend += `<span class="legend-item ${side.cssClass}">${esc(side.label)}`;
    if (e) {
      legend += `: endpoint <span ${val(e.t_flop)}>${fmt(e.t_flop)}</span> FLOP`;
    } else {
      legend += `: no endpoint in range`;
    }
    legend += `</span>`;
  }
  const eA = good[0]?.sweep?.endpoint;
  const eB = good[1]?.sweep?.endpoint;
  if (good.length === 2 && eA && eB) {
    const d = oomDelta(eA.t_flop, eB.t_flop);
    const sign = d >= 0 ? "+" : "";
    legend += `<span class="legend-item delta">Δ endpoint: ${sign}${d.toFixed(2)} OOM</span>`;
  }
  legend += `</div>`;

  return out + s + legend;
}
