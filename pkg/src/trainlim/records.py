"""Machine-readable output: structured (JSON) and CSV record rendering.

One builder produces the record dicts for both the command line and the
HTTP service, so the two surfaces are byte-identical for identical
inputs.  All times are seconds, compute budgets FLOP; the envelope names
its schema version and tags every field's unit.
"""

from __future__ import annotations

import csv
import io
import json
import math

from .closedform import ClosedFormReport
from .search import SweepRecord
from .simulate import ParallelismConfig, StepTimeBreakdown

SCHEMA_VERSION = "trainlim-1"

#: Exact CSV header, stable across releases (validated by a schema test).
CSV_COLUMNS = ["T_flop", "n_gpu", "mfu", "norm_util", "n_dp", "n_tp_ff",
               "n_tp_model", "n_pp", "n_ep", "interleave", "microbatches",
               "schedule", "t_step_s", "t_matmul_s", "t_comm_exposed_s",
               "t_latency_s", "bubble_fraction"]

RECORD_UNITS = {
    "t_flop": "FLOP",
    "n_gpu": "count",
    "mfu": "dimensionless",
    "norm_util": "dimensionless",
    "n_dp": "count", "n_tp_ff": "count", "n_tp_model": "count",
    "n_pp": "count", "n_ep": "count",
    "interleave": "count", "microbatches": "count",
    "t_step_s": "s", "t_matmul_s": "s", "t_comm_exposed_s": "s",
    "t_latency_s": "s",
    "bubble_fraction": "dimensionless",
    "log_fractions": "dimensionless",
}

CLOSED_FORM_UNITS = {
    "d_prime": "dimension", "b_prime": "tokens",
    "n_critical_nodes": "nodes", "n_p_limit": "parameters",
    "t_critical_bandwidth_flop": "FLOP", "t_critical_latency_flop": "FLOP",
    "t_limit_flop": "FLOP", "operative_limit_flop": "FLOP",
    "batch": "tokens", "layers": "count", "experts": "count",
    "t_train_s": "s", "alpha": "dimensionless",
}


def log_fractions(config: ParallelismConfig) -> dict[str, float]:
    """Share of the total parallelism taken by each dimension:
    log(degree)/log(N_GPU), summing to 1 (all zero on a single GPU)."""
    n = config.n_gpu
    degrees = {"dp": config.n_dp, "tp_ff": config.n_tp_ff,
               "tp_model": config.n_tp_model, "pp": config.n_pp,
               "ep": config.n_ep}
    if n <= 1:
        return {k: 0.0 for k in degrees}
    return {k: math.log(d) / math.log(n) for k, d in degrees.items()}


def point_record(t_flop: float, status: str, config: ParallelismConfig | None,
                 breakdown: StepTimeBreakdown | None,
                 norm_util: float | None, message: str = "") -> dict:
    """One sweep/simulation point as a flat JSON-ready dict."""
    rec = {"t_flop": t_flop, "status": status}
    if config is None or breakdown is None:
        rec.update({k: None for k in
                    ("n_gpu", "mfu", "norm_util", "n_dp", "n_tp_ff",
                     "n_tp_model", "n_pp", "n_ep", "interleave",
                     "microbatches", "schedule", "t_step_s", "t_matmul_s",
                     "t_comm_exposed_s", "t_latency_s", "bubble_fraction",
                     "log_fractions")})
    else:
        rec.update({
            "n_gpu": breakdown.n_gpu,
            "mfu": breakdown.mfu,
            "norm_util": norm_util,
            "n_dp": config.n_dp,
            "n_tp_ff": config.n_tp_ff,
            "n_tp_model": config.n_tp_model,
            "n_pp": config.n_pp,
            "n_ep": config.n_ep,
            "interleave": config.interleave,
            "microbatches": config.microbatches,
            "schedule": config.schedule,
            "t_step_s": breakdown.t_step,
            "t_matmul_s": breakdown.t_matmul,
            "t_comm_exposed_s": breakdown.comm.t_exposed,
            "t_latency_s": breakdown.comm.t_latency,
            "bubble_fraction": breakdown.bubble_fraction,
            "log_fractions": log_fractions(config),
        })
    rec["message"] = message or ""
    return rec


def sweep_record_payload(rec: SweepRecord) -> dict:
    return point_record(rec.t_flop, rec.status, rec.config, rec.breakdown,
                        rec.norm_util, rec.message)


def envelope(kind: str, body: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    out.update(body)
    return out


def sweep_payload(records: list[SweepRecord],
                  endpoint: SweepRecord | None) -> dict:
    return envelope("sweep", {
        "units": RECORD_UNITS,
        "records": [sweep_record_payload(r) for r in records],
        "endpoint": None if endpoint is None else sweep_record_payload(endpoint),
    })


def point_payload(kind: str, record: dict) -> dict:
    return envelope(kind, {"units": RECORD_UNITS, "record": record})


def closed_form_payload(report: ClosedFormReport) -> dict:
    fields = {
        "cluster": report.cluster,
        "batch": report.batch,
        "layers": report.layers,
        "experts": report.experts,
        "t_train_s": report.t_train_s,
        "alpha": report.alpha,
        "d_prime": report.d_prime,
        "b_prime": report.b_prime,
        "sram_regime": report.sram_regime,
        "n_critical_nodes": report.n_critical_nodes,
        "t_critical_bandwidth_flop": report.t_critical_bandwidth_flop,
        "t_critical_latency_flop": report.t_critical_latency_flop,
        "t_limit_flop": report.t_limit_flop,
        "n_p_limit": report.n_p_limit,
        "operative_limit_flop": report.operative_limit_flop,
    }
    unbounded = [k for k, v in fields.items()
                 if isinstance(v, float) and math.isinf(v)]
    for k in unbounded:
        fields[k] = None
    fields["unbounded_fields"] = unbounded
    return envelope("closed-form", {"units": CLOSED_FORM_UNITS, **fields})


def render_json(payload: dict) -> str:
    """The one JSON renderer: fixed key order, no NaN/inf, trailing
    newline; identical bytes from the CLI and the HTTP service."""
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(records: list[dict]) -> str:
    """Sweep records as CSV with the stable column set; points with no
    feasible configuration keep their T and leave the rest empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    key_of = {"T_flop": "t_flop"}
    for rec in records:
        writer.writerow([_cell(rec.get(key_of.get(col, col))) for col in CSV_COLUMNS])
    return buf.getvalue()
