"""Configuration search: best parallelization, smallest cluster, sweeps.

``best_config`` exhaustively scores every feasible parallelization of a
shape on a given GPU count and returns the fastest, with a fully
deterministic tie-break: (1) smallest run time, (2) least total network
communication time even if overlappable, (3) lexicographically smallest
(n_dp, n_tp_ff, n_tp_model, n_pp, n_ep, interleave, microbatches,
schedule, level split).  Candidates are generated in sorted order and
scored sequentially, so results are bitwise reproducible run to run.

Three pruning rules cut the enumeration without changing the winner (all
are exercised against a brute-force enumerator in the test suite):

  * degree tuples are visited in ascending order of an optimistic lower
    bound on their step time (arithmetic floor + minimum kernel latency +
    best-case DP and TP at the fastest network level) and skipped — then
    abandoned wholesale — once that bound strictly exceeds the incumbent;
  * zero-bubble candidates with interleave > 1 are skipped — with f_b = 0
    interleaving only adds point-to-point volume, and the tie-break
    prefers i = 1 on equality;
  * zero-bubble candidates beyond the smallest feasible microbatch count
    are skipped — with f_b pinned at 0 and per-microbatch bandwidth
    invariant, more microbatches only add kernel launches, and the
    tie-break prefers the smaller count on equality;
  * zero-bubble at N_PP = 1 is skipped — without a pipeline it times
    identically to interleaved and loses the tie.

The microbatch grid is powers of two (plus the zero-bubble floor
2·N_PP − 1); interleave ranges over divisors of the per-GPU block count
whenever there is a pipeline, and is pinned to 1 otherwise.  The naive
schedule is never searched: in this model it is identical to interleaved
at i = 1.

``min_cluster`` walks the GPU lattice (multiples of the node size, by
powers of two) until the run fits the time budget, then binary-refines on
node multiples.  It distinguishes a genuine latency wall — the best run
time stops improving as GPUs double, pinned by serial latencies — from
merely exhausting the search cap.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from threading import Lock

from .comm import OverlapPolicy
from .hwspec import ClusterSpec
from .scaling import ModelShape, ScalingLaws, shape_from_compute
from .simulate import (InvariantViolation, LevelAssignment, ParallelismConfig,
                       StepTimeBreakdown, evaluate_step, step_time,
                       sustained_mfu, validate_config)
from .units import THREE_MONTHS_S

#: Default ceiling on cluster sizes min_cluster will consider (~1.7e10 GPUs,
#: a few thousand times today's largest installations).  Scaling questions
#: below the ceiling get a real answer; a run that would need more hardware
#: than that is reported as capped rather than extrapolated, because the
#: model keeps finding configurations at physically meaningless sizes
#: (zero-bubble schedules hide all non-DP latency, so nothing diverges).
#: Callers probing where the model itself gives out can raise it.
GPU_CAP = 2 ** 34
SCHEDULE_ORDER = ("interleaved", "zero-bubble")


class SearchError(RuntimeError):
    pass


class NoFeasibleConfig(SearchError):
    """No parallelization of the shape fits this GPU count."""


def _divisors(n: int) -> list[int]:
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            if d != n // d:
                out.append(n // d)
        d += 1
    return sorted(out)


def _degree_tuples(shape: ModelShape, n_gpu: int):
    """Yield (n_tp_model, n_tp_ff, n_ep, n_pp, n_dp) with product n_gpu,
    honoring every divisibility invariant, in sorted order."""
    for n_tp_m in _divisors(math.gcd(n_gpu, shape.d_model)):
        r1 = n_gpu // n_tp_m
        for n_tp_f in _divisors(math.gcd(r1, shape.d_ff)):
            r2 = r1 // n_tp_f
            for n_ep in _divisors(math.gcd(r2, shape.n_experts)):
                r3 = r2 // n_ep
                for n_pp in _divisors(math.gcd(r3, shape.n_layers)):
                    n_dp = r3 // n_pp
                    if shape.batch % (shape.n_experts * n_dp) == 0:
                        yield (n_tp_m, n_tp_f, n_ep, n_pp, n_dp)


def _microbatch_candidates(shape: ModelShape, n_dp: int, n_pp: int) -> list[int]:
    cap = shape.batch // (shape.n_experts * n_dp)
    out = []
    m = 1
    while m <= cap:
        if shape.batch % (shape.n_experts * n_dp * m) == 0:
            out.append(m)
        m *= 2
    zb = 2 * n_pp - 1
    if zb <= cap and shape.batch % (shape.n_experts * n_dp * zb) == 0 and zb not in out:
        out.append(zb)
    return sorted(out)


def _level_splits(cluster: ClusterSpec, degrees: list[tuple[str, int]]):
    """All order-respecting splits of the method degrees (given in
    fastest-to-slowest priority order) across the network levels.

    Methods fill levels bottom-up without interleaving; a method may
    straddle a level boundary by factoring its degree.  Per level, the
    placed product must divide the level's capacity multiplier.
    """
    H = cluster.levels
    caps = [cluster.level_capacity(h) for h in range(1, H + 1)]
    factors = {name: [1] * H for name, _ in degrees}
    results: list[dict[str, tuple[int, ...]]] = []

    def rec(idx: int, level: int, room: float):
        if idx == len(degrees):
            results.append({k: tuple(v) for k, v in factors.items()})
            return
        name, remaining = degrees[idx]
        if remaining == 1:
            rec(idx + 1, level, room)
            return
        if level >= H:
            return
        for f in _divisors(remaining):
            if f == 1:
                continue
            if math.isfinite(room) and (f > room or room % f != 0):
                continue
            factors[name][level] *= f
            deg2 = degrees[idx]
            degrees[idx] = (name, remaining // f)
            new_room = room / f if math.isfinite(room) else room
            if remaining // f == 1:
                rec(idx + 1, level, new_room)      # next method, same level
            rec(idx, level + 1,                     # same method, next level
                caps[level + 1] if level + 1 < H else 0.0)
            degrees[idx] = deg2
            factors[name][level] //= f
        # or skip this level entirely (start the method higher up)
        if level + 1 < H:
            rec(idx, level + 1, caps[level + 1])

    rec(0, 0, caps[0])
    # dedupe (skip-level paths can reproduce a split); keep first-seen order
    seen = set()
    uniq = []
    for r in results:
        key = tuple(sorted((k, v) for k, v in r.items()))
        if key not in seen:
            seen.add(key)
            uniq.append(r)
    return uniq


def _splits_for(cluster: ClusterSpec, n_tp_m, n_tp_f, n_ep, n_pp, n_dp):
    """Level splits in descending communication-intensity priority:
    TP over d_model innermost, then TP over d_ff, experts, pipeline, data."""
    degrees = [("tp_model", n_tp_m), ("tp_ff", n_tp_f), ("ep", n_ep),
               ("pp", n_pp), ("dp", n_dp)]
    out = []
    for split in _level_splits(cluster, degrees):
        out.append(LevelAssignment(dp=split["dp"], tp_ff=split["tp_ff"],
                                   tp_model=split["tp_model"],
                                   pp=split["pp"], ep=split["ep"]))
    return out


def enumerate_configs(shape: ModelShape, n_gpu: int, cluster: ClusterSpec):
    """Every feasible ParallelismConfig for the shape at exactly n_gpu GPUs,
    in deterministic order.  No dominance pruning here — this is the search
    space itself."""
    for n_tp_m, n_tp_f, n_ep, n_pp, n_dp in _degree_tuples(shape, n_gpu):
        splits = _splits_for(cluster, n_tp_m, n_tp_f, n_ep, n_pp, n_dp)
        if not splits:
            continue
        interleaves = _divisors(shape.n_layers // n_pp) if n_pp > 1 else [1]
        ms = _microbatch_candidates(shape, n_dp, n_pp)
        for schedule in SCHEDULE_ORDER:
            for i in interleaves:
                for m in ms:
                    if schedule == "zero-bubble" and m < 2 * n_pp - 1:
                        continue
                    for lv in splits:
                        cfg = ParallelismConfig(
                            n_dp=n_dp, n_tp_ff=n_tp_f, n_tp_model=n_tp_m,
                            n_pp=n_pp, n_ep=n_ep, interleave=i,
                            microbatches=m, schedule=schedule, levels=lv)
                        try:
                            yield validate_config(shape, cfg, cluster, n_gpu)
                        except InvariantViolation:
                            continue


def _candidate_key(cfg: ParallelismConfig):
    return (cfg.n_dp, cfg.n_tp_ff, cfg.n_tp_model, cfg.n_pp, cfg.n_ep,
            cfg.interleave, cfg.microbatches, SCHEDULE_ORDER.index(cfg.schedule),
            cfg.levels.dp, cfg.levels.tp_ff, cfg.levels.tp_model,
            cfg.levels.pp, cfg.levels.ep)


def best_config(shape: ModelShape, n_gpu: int, cluster: ClusterSpec,
                policy: OverlapPolicy | None = None, prune: bool = True,
                bound: float | None = None) -> tuple[ParallelismConfig, StepTimeBreakdown]:
    """Fastest feasible parallelization at exactly n_gpu GPUs.

    Raises NoFeasibleConfig when the enumeration is empty, or — with
    ``bound`` set — when no candidate finishes within ``bound`` seconds of
    run time (min_cluster passes its incumbent here so already-dominated
    sizes prune immediately).  With ``prune=False`` every candidate is
    scored — the equivalence tests run both ways and require identical
    winners.
    """
    policy = policy or OverlapPolicy()
    dev = cluster.device
    b1 = cluster.network[0].unidirectional_bandwidth_per_gpu
    b2 = cluster.network[1].unidirectional_bandwidth_per_gpu \
        if cluster.levels > 1 else b1
    cap1 = cluster.level_capacity(1)
    dp_exp = 1.0 - policy.dp_overlap_fraction
    dp_ov = policy.dp_overlap_fraction
    # per-device arithmetic per step is the same for every config at this n
    arith = 3.0 * shape.n_params * shape.batch / (
        shape.n_experts * n_gpu * dev.peak_arithmetic * dev.sustained_clock_factor)
    steps = shape.steps
    # nudge the bound up one ulp so float rounding can never prune a
    # candidate that would have passed the caller's t_run <= bound check
    bound_t_step = math.inf if bound is None \
        else math.nextafter(bound / steps, math.inf)

    def lb_allreduce(words: float, degree: int) -> float:
        # Optimistic all-reduce time: everything at the fastest level —
        # except that a group larger than level 1 provably pushes a factor
        # >= degree/cap1 to level 2 bandwidth or slower.
        if degree <= 1:
            return 0.0
        t = 2.0 * words * (degree - 1) / degree / b1
        if degree > cap1:
            f2 = degree / cap1
            t = max(t, 2.0 * words * (f2 - 1.0) / f2 / b2)
        return t

    def tuple_lb(tpl) -> float:
        # Valid for every overlap policy: t_step >= exposed DP
        # + max(overlapped DP, matmul floor, non-DP bandwidth floor).
        n_tp_m, n_tp_f, n_ep, n_pp, n_dp = tpl
        shard = shape.n_params / (n_tp_m * n_tp_f * n_pp * n_ep)
        t_dp = lb_allreduce(shard, n_dp)
        kern_lb = 6.0 * (shape.n_layers // n_pp) \
            * (shape.n_experts // n_ep) * dev.kernel_latency
        group_tokens = (shape.n_layers // n_pp) * (shape.n_experts // n_ep) \
            * (shape.batch // (shape.n_experts * n_dp))
        t_tp = 2.0 * (lb_allreduce(group_tokens * (shape.d_ff // n_tp_f), n_tp_m)
                      + lb_allreduce(group_tokens * (shape.d_model // n_tp_m), n_tp_f))
        return dp_exp * t_dp + max(dp_ov * t_dp, arith + kern_lb, t_tp)

    tuples = list(_degree_tuples(shape, n_gpu))
    if prune:
        tuples = sorted(tuples, key=lambda tpl: (tuple_lb(tpl), tpl))
    best = None
    best_key = None
    best_metric = None
    best_t_step = math.inf
    for tpl in tuples:
        n_tp_m, n_tp_f, n_ep, n_pp, n_dp = tpl
        if prune and tuple_lb(tpl) > min(best_t_step, bound_t_step):
            break  # sorted ascending: every remaining tuple prunes too
        splits = _splits_for(cluster, n_tp_m, n_tp_f, n_ep, n_pp, n_dp)
        if not splits:
            continue
        interleaves = _divisors(shape.n_layers // n_pp) if n_pp > 1 else [1]
        ms = _microbatch_candidates(shape, n_dp, n_pp)
        if prune and n_pp == 1:
            ms = ms[:1]  # no bubble to amortize: extra microbatches only cost
        for schedule in SCHEDULE_ORDER:
            if schedule == "zero-bubble":
                if prune and n_pp == 1:
                    # identical times to interleaved (no pipeline, no waiver)
                    # and the tie-break prefers interleaved
                    continue
                m_list = [m for m in ms if m >= 2 * n_pp - 1]
                if prune:
                    m_list = m_list[:1]
                    i_list = [1]
                else:
                    i_list = interleaves
            else:
                m_list = ms
                i_list = interleaves
            for i in i_list:
                for m in m_list:
                    for lv in splits:
                        cfg = ParallelismConfig(
                            n_dp=n_dp, n_tp_ff=n_tp_f, n_tp_model=n_tp_m,
                            n_pp=n_pp, n_ep=n_ep, interleave=i,
                            microbatches=m, schedule=schedule, levels=lv)
                        bd = evaluate_step(shape, cfg, cluster, policy)
                        if bound is not None and bd.t_run > bound:
                            continue
                        metric = (bd.t_run, bd.comm.total_bandwidth_time)
                        key = _candidate_key(cfg)
                        if (best_metric is None or metric < best_metric
                                or (metric == best_metric and key < best_key)):
                            best, best_metric, best_key = (cfg, bd), metric, key
                            best_t_step = bd.t_step
    if best is None:
        raise NoFeasibleConfig(
            f"no feasible parallelization of the shape on {n_gpu} GPUs"
            + (f" within {bound:.3e} s" if bound is not None else ""))
    return best


@dataclass(frozen=True)
class MinClusterResult:
    status: str                # "ok" | "latency-wall" | "cap-exceeded" | "no-config"
    n_gpu: int | None
    config: ParallelismConfig | None
    breakdown: StepTimeBreakdown | None
    best_t_run: float          # best run time seen anywhere in the walk
    probes: tuple[tuple[int, float], ...]
    message: str

    @property
    def feasible(self) -> bool:
        return self.status == "ok"


def min_cluster(shape: ModelShape, cluster: ClusterSpec,
                t_train: float = THREE_MONTHS_S,
                policy: OverlapPolicy | None = None,
                cap: int = GPU_CAP, stall_limit: int = 3) -> MinClusterResult:
    """Smallest GPU count (node multiples) finishing the run within t_train.

    Starts at the arithmetic floor (below it the run misses the budget even
    at full utilization), doubles until the budget is met, then
    binary-refines on node multiples.  If the best run time plateaus
    (< 0.1% improvement over ``stall_limit`` consecutive doublings) while
    still over budget, the run is latency-walled: more GPUs no longer buy
    time.  Hitting ``cap`` while still improving is reported separately as
    cap exhaustion — including the degenerate case where the arithmetic
    floor alone exceeds the cap and nothing needs probing.
    """
    node = cluster.node_size()
    probes = []
    evals: dict[int, tuple] = {}

    # In-model arithmetic floor: t_run >= train_mac / (n · C · scf) at any
    # utilization, so sizes below n_floor can be skipped outright — and when
    # the floor itself exceeds the cap, no walk is needed at all.
    n_floor = shape.train_mac / (cluster.device.peak_arithmetic
                                 * cluster.device.sustained_clock_factor
                                 * t_train)
    if n_floor > cap:
        return MinClusterResult(
            status="cap-exceeded", n_gpu=None, config=None, breakdown=None,
            best_t_run=math.inf, probes=(),
            message=(f"arithmetic alone needs >= {n_floor:.3e} GPUs to meet "
                     f"{t_train:.3e} s; cap is {cap}"))

    def timed(n: int, bound: float | None):
        # A miss under a finite bound only proves t_run > bound; every bound
        # used here is >= t_train, so the cached inf stays correct for the
        # feasibility checks below.
        if n not in evals:
            try:
                cfg, bd = best_config(shape, n, cluster, policy, bound=bound)
                evals[n] = (bd.t_run, cfg, bd)
            except NoFeasibleConfig:
                evals[n] = (math.inf, None, None)
            probes.append((n, evals[n][0]))
        return evals[n]

    n = node
    while n * 2 <= n_floor:
        n *= 2
    best_tr = math.inf
    stall = 0
    hit = None
    while n <= cap:
        bound = None if not math.isfinite(best_tr) \
            else max(t_train, best_tr * (1.0 - 1e-3))
        t_run, cfg, bd = timed(n, bound)
        if t_run <= t_train:
            hit = n
            break
        if math.isfinite(t_run) and t_run < best_tr * (1.0 - 1e-3):
            best_tr = min(best_tr, t_run)
            stall = 0
        elif math.isfinite(best_tr):
            # either a probe above the improvement threshold or one pruned
            # out by the bound: this size bought < 0.1%
            best_tr = min(best_tr, t_run)
            stall += 1
            if stall >= stall_limit:
                return MinClusterResult(
                    status="latency-wall", n_gpu=None, config=None,
                    breakdown=None, best_t_run=best_tr,
                    probes=tuple(probes),
                    message=(f"run time plateaued at {best_tr:.3e} s > "
                             f"budget {t_train:.3e} s; serial latency "
                             f"floor — more GPUs do not help"))
        n *= 2
    if hit is None:
        status = "cap-exceeded" if math.isfinite(best_tr) else "no-config"
        return MinClusterResult(
            status=status, n_gpu=None, config=None, breakdown=None,
            best_t_run=best_tr, probes=tuple(probes),
            message=(f"GPU cap {cap} exhausted; best run time {best_tr:.3e} s"
                     if math.isfinite(best_tr) else
                     "no feasible configuration at any probed size"))
    lo = hit // 2
    while hit - lo > node:
        mid = ((lo + hit) // 2) // node * node
        if mid <= lo:
            break
        if mid < n_floor:  # provably over budget, no need to search
            lo = mid
            continue
        t_run, cfg, bd = timed(mid, t_train)
        if t_run <= t_train:
            hit = mid
        else:
            lo = mid
    t_run, cfg, bd = timed(hit, t_train)
    return MinClusterResult(status="ok", n_gpu=hit, config=cfg, breakdown=bd,
                            best_t_run=t_run, probes=tuple(probes),
                            message=f"{hit} GPUs finish in {t_run:.3e} s")


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRecord:
    t_flop: float
    status: str                # "ok" | "latency-wall" | "cap-exceeded" | ...
    shape: ModelShape | None
    n_gpu: int | None
    config: ParallelismConfig | None
    breakdown: StepTimeBreakdown | None
    norm_util: float | None
    message: str


UTIL_THRESHOLD = 0.8


def log_points(t_min: float, t_max: float, per_decade: int = 16) -> list[float]:
    """Log-spaced compute budgets, inclusive of both ends."""
    if t_min <= 0 or t_max < t_min:
        raise ValueError("need 0 < t_min <= t_max")
    if t_max == t_min:
        return [t_min]
    n = max(1, round(math.log10(t_max / t_min) * per_decade))
    return [t_min * (t_max / t_min) ** (k / n) for k in range(n + 1)]


def sweep(t_values: list[float], cluster: ClusterSpec, mode: str = "dense",
          laws: ScalingLaws | None = None, t_train: float = THREE_MONTHS_S,
          policy: OverlapPolicy | None = None, cap: int = GPU_CAP,
          progress=None, workers: int | None = None) -> list[SweepRecord]:
    """For each compute budget: synthesize the shape, find the smallest
    cluster meeting the budget, record the best configuration.  Failures
    are recorded inline and never abort the sweep.

    Points are independent and evaluated concurrently (``workers`` threads,
    defaulting to the CPU count); the returned list is always ordered like
    ``t_values`` and bitwise identical to a serial run.  ``progress`` fires
    once per point in completion order."""
    sus = sustained_mfu(cluster)

    def run_point(t_flop: float) -> SweepRecord:
        try:
            shape = shape_from_compute(t_flop, mode=mode, laws=laws)
        except Exception as e:  # noqa: BLE001 - recorded, not raised
            return SweepRecord(t_flop=t_flop, status="shape-error",
                               shape=None, n_gpu=None, config=None,
                               breakdown=None, norm_util=None,
                               message=str(e))
        res = min_cluster(shape, cluster, t_train=t_train, policy=policy, cap=cap)
        if res.feasible:
            return SweepRecord(
                t_flop=t_flop, status="ok", shape=shape, n_gpu=res.n_gpu,
                config=res.config, breakdown=res.breakdown,
                norm_util=res.breakdown.mfu / sus, message=res.message)
        return SweepRecord(t_flop=t_flop, status=res.status, shape=shape,
                          n_gpu=None, config=None, breakdown=None,
                          norm_util=None, message=res.message)

    if workers is None:
        workers = min(len(t_values), os.cpu_count() or 1) or 1
    records: list[SweepRecord | None] = [None] * len(t_values)
    if workers <= 1 or len(t_values) <= 1:
        for i, t_flop in enumerate(t_values):
            records[i] = run_point(t_flop)
            if progress is not None:
                progress(records[i])
        return records
    report = Lock()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_point, t): i for i, t in enumerate(t_values)}
        for fut in as_completed(futures):
            rec = fut.result()
            records[futures[fut]] = rec
            if progress is not None:
                with report:
                    progress(rec)
    return records


def find_endpoint(records: list[SweepRecord],
                  threshold: float = UTIL_THRESHOLD) -> SweepRecord | None:
    """First sweep point that falls off the cliff: normalized utilization
    below threshold, or no feasible cluster at all."""
    for rec in records:
        if rec.status != "ok" or (rec.norm_util is not None
                                  and rec.norm_util < threshold):
            return rec
    return None
