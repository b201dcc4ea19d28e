"""Command line: presets, closed forms, single runs, searches, sweeps.

Human-readable tables go to standard output; ``--format csv`` and
``--format structured`` (JSON, the same schema the HTTP service returns)
are for files and tooling.  Exit codes: 0 success, 2 bad usage or bad
input values, 3 no feasible configuration, 4 internal error.

Preset lookups honor the ``TRAINLIM_PRESET_DIR`` environment variable: a
directory of ``<name>.yaml`` cluster files that extends and shadows the
built-in list.
"""

from __future__ import annotations

import functools
import math
import sys

import click
import yaml

from .closedform import closed_form_report
from .comm import OverlapPolicy
from .hwspec import ClusterSpec, cluster_to_doc, load_cluster_spec, preset, preset_names
from .records import (
    closed_form_payload,
    point_payload,
    point_record,
    render_csv,
    render_json,
    sweep_payload,
    sweep_record_payload,
)
from .scaling import LAW_PRESETS, make_shape, shape_from_compute, training_compute
from .search import (
    GPU_CAP,
    NoFeasibleConfig,
    best_config,
    find_endpoint,
    log_points,
    min_cluster,
    sweep,
)
from .simulate import (
    InvariantViolation,
    ParallelismConfig,
    evaluate_step,
    sustained_mfu,
    validate_config,
)
from .units import THREE_MONTHS_S

EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


def run_guard(fn):
    """Map domain failures onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InvariantViolation as e:
            click.echo(f"infeasible: {e}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        except NoFeasibleConfig as e:
            click.echo(f"infeasible: {e}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        except click.ClickException:
            raise
        except ValueError as e:
            raise click.UsageError(str(e))
        except Exception as e:  # noqa: BLE001 - last-resort exit code
            click.echo(f"internal error: {e!r}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


def cluster_options(fn):
    fn = click.option("--preset", "preset_name", default=None,
                      help="Built-in or TRAINLIM_PRESET_DIR cluster name.")(fn)
    fn = click.option("--spec", "spec_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="Cluster YAML file (see docs/cluster-format.md).")(fn)
    return fn


def resolve_cluster(preset_name: str | None, spec_path: str | None) -> ClusterSpec:
    if (preset_name is None) == (spec_path is None):
        raise click.UsageError("give exactly one of --preset or --spec")
    if preset_name is not None:
        return preset(preset_name)
    return load_cluster_spec(spec_path)


def shape_options(fn):
    for opt in reversed([
        click.option("--d-model", type=int, default=None),
        click.option("--d-ff", type=int, default=None),
        click.option("--layers", "n_layers", type=int, default=None),
        click.option("--batch", type=int, default=None,
                     help="Tokens per optimizer step."),
        click.option("--experts", type=int, default=1),
        click.option("--t-flop", type=float, default=None,
                     help="Training compute budget; synthesizes the "
                          "compute-optimal shape instead of explicit dims."),
        click.option("--mode", type=click.Choice(["dense", "sparse"]),
                     default="dense"),
        click.option("--laws", type=click.Choice(sorted(LAW_PRESETS)),
                     default="default"),
    ]):
        fn = opt(fn)
    return fn


def resolve_shape(d_model, d_ff, n_layers, batch, experts, t_flop, mode, laws):
    explicit = [d_model, d_ff, n_layers, batch]
    if t_flop is not None:
        if any(v is not None for v in explicit):
            raise click.UsageError("--t-flop replaces the explicit shape flags")
        return shape_from_compute(t_flop, mode=mode, laws=LAW_PRESETS[laws])
    if any(v is None for v in explicit):
        raise click.UsageError(
            "give --d-model/--d-ff/--layers/--batch, or --t-flop")
    return make_shape(d_model, d_ff, n_layers, batch, n_experts=experts)


def policy_option(fn):
    return click.option(
        "--dp-overlap", type=click.FloatRange(0.0, 1.0), default=None,
        help="Fraction of the gradient all-reduce hidden under compute "
             "(default: fully overlapped).")(fn)


def resolve_policy(dp_overlap: float | None) -> OverlapPolicy | None:
    return None if dp_overlap is None else OverlapPolicy(dp_overlap_fraction=dp_overlap)


def emit(text: str, output):
    click.echo(text, file=output, nl=False)


FMT = click.Choice(["human", "csv", "structured"])


@click.group()
def main():
    """Limits of distributed neural-network training: simulate a
    parallelization, search for the best one, size a cluster, sweep a
    compute range, or evaluate the closed-form ceilings."""


@main.command("presets")
@click.argument("name", required=False)
@run_guard
def cmd_presets(name):
    """List cluster presets, or print one as a YAML spec."""
    if name is None:
        for n in preset_names():
            click.echo(n)
    else:
        click.echo(yaml.safe_dump(cluster_to_doc(preset(name)), sort_keys=False),
                   nl=False)


@main.command("closed-form")
@cluster_options
@click.option("--batch", type=float, default=4e6, help="Tokens per step.")
@click.option("--layers", type=float, default=100.0)
@click.option("--sparsity", type=float, default=1.0,
              help="Experts per MLP block (E).")
@click.option("--duration", type=float, default=THREE_MONTHS_S,
              help="Training duration budget in seconds.")
@click.option("--alpha", type=float, default=0.0,
              help="Batch-growth exponent: batch scales as (T/T0)^alpha.")
@click.option("--format", "fmt", type=click.Choice(["human", "structured"]),
              default="human")
@click.option("--output", type=click.File("w"), default="-")
@run_guard
def cmd_closed_form(preset_name, spec_path, batch, layers, sparsity, duration,
                    alpha, fmt, output):
    """Analytic ceilings: critical dimension, nanobatch, compute limits."""
    cluster = resolve_cluster(preset_name, spec_path)
    report = closed_form_report(cluster, batch=batch, layers=layers,
                                experts=sparsity, t_train=duration, alpha=alpha)
    if fmt == "structured":
        emit(render_json(closed_form_payload(report)), output)
        return
    rows = [
        ("cluster", report.cluster),
        ("critical dimension d'", f"{report.d_prime:.1f}"),
        ("critical nanobatch b'", f"{report.b_prime:.2f}"
         + ("  (weights resident in SRAM)" if report.sram_regime else "")),
        ("critical cluster", f"{report.n_critical_nodes:.3e} nodes"),
        ("T_critical (bandwidth)", f"{report.t_critical_bandwidth_flop:.3e} FLOP"),
        ("T_critical (latency)", f"{report.t_critical_latency_flop:.3e} FLOP"),
        ("T_limit (latency wall)", f"{report.t_limit_flop:.3e} FLOP"),
        ("N_p at the wall", f"{report.n_p_limit:.3e} params"),
        ("operative limit", f"{report.operative_limit_flop:.3e} FLOP"),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        emit(f"{k:<{width}}  {v}\n", output)


def _render_point(kind, shape, cluster, config, breakdown, fmt, output):
    t_flop = training_compute(shape)
    norm = breakdown.mfu / sustained_mfu(cluster)
    rec = point_record(t_flop, "ok", config, breakdown, norm)
    if fmt == "structured":
        emit(render_json(point_payload(kind, rec)), output)
        return
    if fmt == "csv":
        emit(render_csv([rec]), output)
        return
    c = config
    rows = [
        ("T (train compute)", f"{t_flop:.3e} FLOP"),
        ("n_gpu", str(breakdown.n_gpu)),
        ("parallelism", f"dp={c.n_dp} tp_ff={c.n_tp_ff} tp_model={c.n_tp_model} "
                        f"pp={c.n_pp} ep={c.n_ep}"),
        ("schedule", f"{c.schedule} (i={c.interleave}, m={c.microbatches})"),
        ("nanobatch", f"{breakdown.nanobatch:g}"),
        ("t_step", f"{breakdown.t_step:.6e} s"),
        ("t_matmul", f"{breakdown.t_matmul:.6e} s"),
        ("t_comm exposed", f"{breakdown.comm.t_exposed:.6e} s"),
        ("t_latency", f"{breakdown.comm.t_latency:.6e} s"),
        ("bubble fraction", f"{breakdown.bubble_fraction:.4f}"),
        ("run time", f"{breakdown.t_run:.4e} s"),
        ("MFU", f"{breakdown.mfu:.4f}"),
        ("normalized utilization", f"{norm:.4f}"),
        ("weights fit in SRAM", str(breakdown.weights_in_sram)),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        emit(f"{k:<{width}}  {v}\n", output)


@main.command("simulate")
@cluster_options
@shape_options
@click.option("--dp", type=int, default=1)
@click.option("--tp-ff", type=int, default=1)
@click.option("--tp-model", type=int, default=1)
@click.option("--pp", type=int, default=1)
@click.option("--ep", type=int, default=1)
@click.option("--interleave", type=int, default=1)
@click.option("--microbatches", type=int, default=1)
@click.option("--schedule", type=click.Choice(["naive", "interleaved", "zero-bubble"]),
              default="interleaved")
@policy_option
@click.option("--format", "fmt", type=FMT, default="human")
@click.option("--output", type=click.File("w"), default="-")
@run_guard
def cmd_simulate(preset_name, spec_path, d_model, d_ff, n_layers, batch,
                 experts, t_flop, mode, laws, dp, tp_ff, tp_model, pp, ep,
                 interleave, microbatches, schedule, dp_overlap, fmt, output):
    """Time one pinned parallelization (no search)."""
    cluster = resolve_cluster(preset_name, spec_path)
    shape = resolve_shape(d_model, d_ff, n_layers, batch, experts, t_flop,
                          mode, laws)
    config = ParallelismConfig(n_dp=dp, n_tp_ff=tp_ff, n_tp_model=tp_model,
                               n_pp=pp, n_ep=ep, interleave=interleave,
                               microbatches=microbatches, schedule=schedule)
    config = validate_config(shape, config, cluster)
    breakdown = evaluate_step(shape, config, cluster, resolve_policy(dp_overlap))
    _render_point("simulate", shape, cluster, config, breakdown, fmt, output)


@main.command("search")
@cluster_options
@shape_options
@click.option("--n-gpu", type=int, default=None,
              help="Fixed cluster size; omit to search for the smallest "
                   "cluster meeting --duration.")
@click.option("--duration", type=float, default=THREE_MONTHS_S,
              help="Training duration budget in seconds (min-cluster mode).")
@click.option("--gpu-cap", type=int, default=GPU_CAP)
@policy_option
@click.option("--format", "fmt", type=FMT, default="human")
@click.option("--output", type=click.File("w"), default="-")
@run_guard
def cmd_search(preset_name, spec_path, d_model, d_ff, n_layers, batch, experts,
               t_flop, mode, laws, n_gpu, duration, gpu_cap, dp_overlap, fmt,
               output):
    """Best parallelization at a fixed size, or the smallest viable cluster."""
    cluster = resolve_cluster(preset_name, spec_path)
    shape = resolve_shape(d_model, d_ff, n_layers, batch, experts, t_flop,
                          mode, laws)
    policy = resolve_policy(dp_overlap)
    if n_gpu is not None:
        config, breakdown = best_config(shape, n_gpu, cluster, policy=policy)
    else:
        res = min_cluster(shape, cluster, t_train=duration, policy=policy,
                          cap=gpu_cap)
        if not res.feasible:
            click.echo(f"infeasible ({res.status}): {res.message}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        config, breakdown = res.config, res.breakdown
    _render_point("search", shape, cluster, config, breakdown, fmt, output)


@main.command("sweep")
@cluster_options
@click.option("--t-min", type=float, required=True, help="Lowest T in FLOP.")
@click.option("--t-max", type=float, required=True, help="Highest T in FLOP.")
@click.option("--per-decade", type=int, default=16, show_default=True,
              help="Log-spaced points per decade of T.")
@click.option("--mode", type=click.Choice(["dense", "sparse"]), default="dense")
@click.option("--laws", type=click.Choice(sorted(LAW_PRESETS)), default="default")
@click.option("--duration", type=float, default=THREE_MONTHS_S)
@click.option("--gpu-cap", type=int, default=GPU_CAP)
@policy_option
@click.option("--format", "fmt", type=FMT, default="human")
@click.option("--output", type=click.File("w"), default="-")
@run_guard
def cmd_sweep(preset_name, spec_path, t_min, t_max, per_decade, mode, laws,
              duration, gpu_cap, dp_overlap, fmt, output):
    """Minimum-cluster records over a log-spaced compute range, with the
    linear-scaling endpoint (first point under 80% normalized utilization)."""
    cluster = resolve_cluster(preset_name, spec_path)
    points = log_points(t_min, t_max, per_decade)
    records = sweep(points, cluster, mode=mode, laws=LAW_PRESETS[laws],
                    t_train=duration, policy=resolve_policy(dp_overlap),
                    cap=gpu_cap)
    endpoint = find_endpoint(records)
    if fmt == "structured":
        emit(render_json(sweep_payload(records, endpoint)), output)
        return
    if fmt == "csv":
        emit(render_csv([sweep_record_payload(r) for r in records]), output)
        _echo_endpoint(endpoint, err=True)
        return
    header = (f"{'T_flop':>10}  {'status':<13} {'n_gpu':>12}  {'mfu':>6}  "
              f"{'norm':>6}  {'dpxtfxtmxppxep':<16} {'sched':<12} {'t_step_s':>12}")
    emit(header + "\n", output)
    for r in records:
        if r.status != "ok":
            emit(f"{r.t_flop:>10.2e}  {r.status:<13} {'':>12}  {'':>6}  "
                 f"{'':>6}  {r.message}\n", output)
            continue
        c = r.config
        degrees = f"{c.n_dp}x{c.n_tp_ff}x{c.n_tp_model}x{c.n_pp}x{c.n_ep}"
        emit(f"{r.t_flop:>10.2e}  {r.status:<13} {r.n_gpu:>12}  "
             f"{r.breakdown.mfu:>6.3f}  {r.norm_util:>6.3f}  {degrees:<16} "
             f"{c.schedule:<12} {r.breakdown.t_step:>12.4e}\n", output)
    _echo_endpoint(endpoint, output=output)


def _echo_endpoint(endpoint, output=None, err=False):
    if endpoint is None:
        click.echo("linear-scaling endpoint: none within range",
                   file=output, err=err)
    else:
        norm = "" if endpoint.norm_util is None else \
            f" (norm_util={endpoint.norm_util:.3f})"
        click.echo(f"linear-scaling endpoint: T={endpoint.t_flop:.4e} FLOP"
                   f" [{endpoint.status}]{norm}", file=output, err=err)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Origin allowed to call the API (repeatable).")
@run_guard
def cmd_serve(host, port, cors_origins):
    """Run the JSON-over-HTTP service for the explorer UI."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(cors_origins=list(cors_origins)), host=host, port=port)


if __name__ == "__main__":
    main()
