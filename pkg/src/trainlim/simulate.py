"""Step-time simulation for one (shape, parallelization, cluster) choice.

The per-step timeline of a worst-placed device:

    t_step = t_net_latency + t_DP_exposed
             + max(t_DP_overlap,
                   (max(t_matmul, t_nonDP_overlap) + t_nonDP_exposed)
                   / (1 − f_b))

Per-microbatch communication (TP all-reduces, PP/EP activations) either
hides under matmul time or rides on top of it, and both dilate with the
pipeline bubble; the optimizer-step data-parallel all-reduce happens once
per batch outside the bubble.  Serial network latency events are charged
on top — they are what eventually builds the latency wall.

Device arithmetic: a device owns L/N_PP block positions × its share of
expert slices (E/N_EP), and per step runs m microbatches through each:
six matmul kernels per block visit (two forward, two activation-gradient,
two weight-gradient), every kernel paying the launch latency, at nanobatch
b' = b / (E · N_DP · m).  When the device's SRAM fits twice its parameter
shard, weight matrices stop costing DRAM traffic ("weights in SRAM").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .comm import CommTimes, OverlapPolicy, comm_times
from .hwspec import ClusterSpec
from .matmul import matmul_time
from .pipeline import SCHEDULES, ScheduleError, bubble_fraction
from .scaling import ModelShape


class InvariantViolation(ValueError):
    """A parallelism config violates a structural invariant; ``name`` is the
    machine-readable invariant identifier surfaced by the API."""

    def __init__(self, name: str, detail: str):
        self.name = name
        super().__init__(f"{name}: {detail}")


@dataclass(frozen=True)
class LevelAssignment:
    """Per-network-level group factors for each parallelism method; every
    tuple has one entry per network level and multiplies to the method's
    total degree."""
    dp: tuple[int, ...]
    tp_ff: tuple[int, ...]
    tp_model: tuple[int, ...]
    pp: tuple[int, ...]
    ep: tuple[int, ...]

    @staticmethod
    def flat(config: "ParallelismConfig", n_levels: int) -> "LevelAssignment":
        """Default assignment: everything at level 1 (valid for single-level
        networks or when the level-1 domain covers the whole job)."""
        def one(total):
            return (total,) + (1,) * (n_levels - 1)
        return LevelAssignment(dp=one(config.n_dp), tp_ff=one(config.n_tp_ff),
                               tp_model=one(config.n_tp_model),
                               pp=one(config.n_pp), ep=one(config.n_ep))


@dataclass(frozen=True)
class ParallelismConfig:
    n_dp: int = 1
    n_tp_ff: int = 1
    n_tp_model: int = 1
    n_pp: int = 1
    n_ep: int = 1
    interleave: int = 1
    microbatches: int = 1
    schedule: str = "interleaved"
    levels: LevelAssignment | None = None

    @property
    def n_gpu(self) -> int:
        return self.n_dp * self.n_tp_ff * self.n_tp_model * self.n_pp * self.n_ep

    @property
    def n_tp(self) -> int:
        return self.n_tp_ff * self.n_tp_model

    def with_levels(self, levels: LevelAssignment) -> "ParallelismConfig":
        return ParallelismConfig(**{**self.__dict__, "levels": levels})


def _check(cond: bool, name: str, detail: str) -> None:
    if not cond:
        raise InvariantViolation(name, detail)


def validate_config(shape: ModelShape, config: ParallelismConfig,
                    cluster: ClusterSpec, n_gpu: int | None = None) -> ParallelismConfig:
    """Check every structural invariant; returns the config with a concrete
    level assignment filled in (flat default if none was given)."""
    c = config
    _check(min(c.n_dp, c.n_tp_ff, c.n_tp_model, c.n_pp, c.n_ep,
               c.interleave, c.microbatches) >= 1,
           "positive-degrees", "all degrees must be >= 1")
    if n_gpu is not None:
        _check(c.n_gpu == n_gpu, "gpu-product",
               f"degrees multiply to {c.n_gpu}, cluster has {n_gpu}")
    _check(c.schedule in SCHEDULES, "known-schedule",
           f"schedule {c.schedule!r} not in {SCHEDULES}")
    _check(c.n_ep <= shape.n_experts, "expert-degree",
           f"N_EP={c.n_ep} exceeds expert count {shape.n_experts}")
    _check(shape.n_experts % c.n_ep == 0, "expert-divisibility",
           f"N_EP={c.n_ep} must divide E={shape.n_experts}")
    stages = c.n_pp * c.interleave
    _check(stages <= shape.n_layers and shape.n_layers % stages == 0,
           "stage-divisibility",
           f"N_PP·i={stages} must divide L={shape.n_layers}")
    _check(shape.d_ff % c.n_tp_ff == 0, "tp-ff-divisibility",
           f"N_TP_ff={c.n_tp_ff} must divide d_ff={shape.d_ff}")
    _check(shape.d_model % c.n_tp_model == 0, "tp-model-divisibility",
           f"N_TP_model={c.n_tp_model} must divide d_model={shape.d_model}")
    denom = shape.n_experts * c.n_dp * c.microbatches
    _check(shape.batch % denom == 0 and shape.batch >= denom,
           "nanobatch-integral",
           f"b'=b/(E·N_DP·m)={shape.batch}/{denom} must be a positive integer")
    if c.schedule == "naive":
        _check(c.interleave == 1, "naive-no-interleave",
               "naive schedule requires i=1")
    _check(c.interleave == 1 or c.n_pp > 1, "interleave-needs-pipeline",
           "interleave > 1 is meaningless without pipeline parallelism")
    if c.schedule == "zero-bubble":
        _check(c.microbatches >= 2 * c.n_pp - 1, "zero-bubble-depth",
               f"m={c.microbatches} < 2·N_PP−1={2 * c.n_pp - 1}")
    lv = c.levels or LevelAssignment.flat(c, cluster.levels)
    for method, factors, total in (("dp", lv.dp, c.n_dp),
                                   ("tp_ff", lv.tp_ff, c.n_tp_ff),
                                   ("tp_model", lv.tp_model, c.n_tp_model),
                                   ("pp", lv.pp, c.n_pp),
                                   ("ep", lv.ep, c.n_ep)):
        _check(len(factors) == cluster.levels, "level-arity",
               f"{method}: {len(factors)} factors for {cluster.levels} levels")
        _check(math.prod(factors) == total, "level-product",
               f"{method}: factors {factors} do not multiply to {total}")
    for h in range(1, cluster.levels + 1):
        used = (lv.dp[h - 1] * lv.tp_ff[h - 1] * lv.tp_model[h - 1]
                * lv.pp[h - 1] * lv.ep[h - 1])
        cap = cluster.level_capacity(h)
        _check(used <= cap, "level-capacity",
               f"level {h} holds factor {used} > capacity {cap:g}")
    return c if c.levels is not None else c.with_levels(lv)


@dataclass(frozen=True)
class StepTimeBreakdown:
    t_matmul: float
    comm: CommTimes
    bubble_fraction: float
    t_step: float
    t_run: float
    mfu: float
    weights_in_sram: bool
    nanobatch: int
    n_gpu: int


def weights_fit_in_sram(shape: ModelShape, config: ParallelismConfig,
                        cluster: ClusterSpec) -> bool:
    """True when each device's SRAM holds 2× its parameter shard (weights
    plus an extra copy's worth of slack for accumulators)."""
    shard = shape.n_params / (config.n_tp * config.n_pp * config.n_ep)
    return cluster.device.sram_capacity() >= 2.0 * shard


# Per-block matmul times repeat endlessly across a search (same device, a
# handful of distinct local shapes); memoize on the live device object so the
# frozen dataclass is hashed once per distinct shape, not once per call.
_BLOCK_DEV = None
_BLOCK_CACHE: dict = {}


def _block_matmul_time(dev, d_ff: int, d_model: int, b_nano: int,
                       sram: bool) -> float:
    global _BLOCK_DEV
    if dev is not _BLOCK_DEV:
        _BLOCK_DEV = dev
        _BLOCK_CACHE.clear()
    key = (d_ff, d_model, b_nano, sram)
    t = _BLOCK_CACHE.get(key)
    if t is None:
        w_res = ("a",) if sram else ()
        g_res = ("out",) if sram else ()
        # fwd pair + activation-grad pair (weight is the A operand) ...
        t = 2.0 * (matmul_time((d_ff, d_model, b_nano), dev, w_res).total
                   + matmul_time((d_model, d_ff, b_nano), dev, w_res).total)
        # ... + weight-grad pair (weight gradient is the output)
        t += (matmul_time((d_ff, b_nano, d_model), dev, g_res).total
              + matmul_time((d_model, b_nano, d_ff), dev, g_res).total)
        _BLOCK_CACHE[key] = t
    return t


def device_matmul_time(shape: ModelShape, config: ParallelismConfig,
                       cluster: ClusterSpec) -> float:
    """Serial matmul time per device per optimizer step, kernel latencies
    included."""
    d_ff = shape.d_ff // config.n_tp_ff
    d_model = shape.d_model // config.n_tp_model
    b_nano = shape.batch // (shape.n_experts * config.n_dp * config.microbatches)
    visits = config.microbatches * (shape.n_layers // config.n_pp) \
        * (shape.n_experts // config.n_ep)
    sram = weights_fit_in_sram(shape, config, cluster)
    return visits * _block_matmul_time(cluster.device, d_ff, d_model, b_nano, sram)


def evaluate_step(shape: ModelShape, config: ParallelismConfig,
                  cluster: ClusterSpec,
                  policy: OverlapPolicy | None = None) -> StepTimeBreakdown:
    """``step_time`` without the invariant checks: the config must already
    carry a concrete level assignment and be known-valid (search constructs
    such configs by enumeration over divisors)."""
    f_b = bubble_fraction(config.schedule, config.n_pp, config.microbatches,
                          config.interleave)
    t_mm = device_matmul_time(shape, config, cluster)
    comm = comm_times(shape, config, cluster, policy)
    bubble_scaled = (max(t_mm, comm.t_ndp_overlap) + comm.t_ndp_exposed) / (1.0 - f_b)
    t_step = (comm.t_latency + comm.t_dp_exposed
              + max(comm.t_dp_overlap, bubble_scaled))
    t_run = shape.steps * t_step
    mfu = shape.train_mac / (config.n_gpu * cluster.device.peak_arithmetic * t_run)
    return StepTimeBreakdown(
        t_matmul=t_mm, comm=comm, bubble_fraction=f_b, t_step=t_step,
        t_run=t_run, mfu=mfu,
        weights_in_sram=weights_fit_in_sram(shape, config, cluster),
        nanobatch=shape.batch // (shape.n_experts * config.n_dp * config.microbatches),
        n_gpu=config.n_gpu)


def step_time(shape: ModelShape, config: ParallelismConfig,
              cluster: ClusterSpec, policy: OverlapPolicy | None = None) -> StepTimeBreakdown:
    """Time one optimizer step end to end; see the module docstring for the
    composition rule."""
    config = validate_config(shape, config, cluster)
    return evaluate_step(shape, config, cluster, policy)


def run_time(shape: ModelShape, config: ParallelismConfig,
             cluster: ClusterSpec, policy: OverlapPolicy | None = None) -> float:
    return step_time(shape, config, cluster, policy).t_run


def sustained_mfu(cluster: ClusterSpec) -> float:
    """Utilization a single device reaches on a large healthy matmul — the
    normalizer for the sweep's 'fraction of achievable' utilization axis."""
    mm = matmul_time((8192, 8192, 8192), cluster.device)
    t_ideal = 8192.0 ** 3 / cluster.device.peak_arithmetic
    return t_ideal / mm.total
