"""Communication calculus: volumes, point-to-point frequencies, and times.

Counting convention: communication is measured in words *received* per GPU
(a ring all-reduce of w words over N peers delivers 2·w·(N−1)/N words to
each GPU — reduce-scatter plus all-gather).  Cluster-wide volumes are the
sum of received words over all GPUs for one optimizer batch.

Per-batch cluster volumes for a (d_model, d_ff, L, E, b) model under a
(N_DP, N_TP_ff, N_TP_model, N_PP, N_EP, i) parallelization:

    M_DP = 2 · N_p · (N_DP − 1)
    M_TP = 4 · L · b · (d_ff·(N_TP_model − 1) + d_model·(N_TP_ff − 1))
    M_PP = 2 · b · d_model · (N_PP·i − 1)
    M_EP = 2 · b · d_model · (L − N_PP·i) · (1 − 1/N_EP)

Tensor-parallel all-reduces follow from the general sliced-matmul volume
(``slicing_volume``); pipeline/expert transfers move one activation vector
(d_model words) per token per crossed block interface, forward and
backward.

Hierarchies: a method's degree factorizes across network levels
(e.g. N_DP = 8 on NVLink × 64 on InfiniBand), and an all-reduce then runs
the per-level formula at each level's bandwidth.  Point-to-point traffic
lands on the level determined by which group boundary the two blocks
straddle; ``p2p_frequencies`` gives the exact distribution over levels for
the deterministic pipeline placement convolved with uniform expert routing.

Serial latency accounting (a documented, deliberately conservative rule):

  * data-parallel all-reduce: 2 events per level it spans, any schedule;
  * tensor-parallel: 2·(blocks per device)·m events per sliced dimension
    per level it spans (fwd+bwd all-reduce per block visit) — waived under
    zero-bubble schedules with a real pipeline (N_PP > 1), which hide them
    in deferred-weight slack; a one-stage run has no such slack;
  * pipeline/expert: one event per virtual-stage interface per fill+drain
    (2·(N_PP·i − 1) total), each charged at its interface's level, lifted
    to the deepest expert level when N_EP > 1 (worst-case routing).

Bandwidth volumes always use *expected* expert routing; only latency uses
the worst case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .hwspec import ClusterSpec, NetworkLevel


class CommError(ValueError):
    pass


def allreduce_words_per_gpu(words: float, n: int) -> float:
    """Words received per GPU for a ring all-reduce of ``words`` over n GPUs.

    2·w·(N−1)/N: reduce-scatter moves w·(N−1)/N, all-gather the same again.
    (100, 8) → 175.
    """
    if n < 1:
        raise CommError("all-reduce group must have >= 1 member")
    if n == 1:
        return 0.0
    return 2.0 * words * (n - 1) / n


def slicing_volume(i_dim: int, j_dim: int, k_dim: int,
                   n_i: int, n_j: int, n_k: int) -> float:
    """Total received words to compute an (I×K)·(K×J) matmul sliced over an
    (N_I, N_J, N_K) grid, forward and backward combined.

    Each matrix is all-reduced across the one grid axis it has no index in:
    2·[ I·J·(N_K−1) + K·J·(N_I−1) + I·K·(N_J−1) ].  Minimized for a fixed
    GPU count by cube-balancing the per-GPU shard.
    """
    for dim, nd, tag in ((i_dim, n_i, "I"), (j_dim, n_j, "J"), (k_dim, n_k, "K")):
        if nd < 1 or dim % nd != 0:
            raise CommError(f"slice count {nd} must divide dim {tag}={dim}")
    return 2.0 * (i_dim * j_dim * (n_k - 1)
                  + k_dim * j_dim * (n_i - 1)
                  + i_dim * k_dim * (n_j - 1))


@dataclass(frozen=True)
class CommVolumes:
    """Cluster-wide received words per optimizer batch, by method."""
    dp: float
    tp: float
    pp: float
    ep: float

    @property
    def total(self) -> float:
        return self.dp + self.tp + self.pp + self.ep


def batch_comm_volumes(shape, config) -> CommVolumes:
    """Per-batch cluster communication volumes (words) for shape × config."""
    n_tp_m, n_tp_f = config.n_tp_model, config.n_tp_ff
    stages = config.n_pp * config.interleave
    dp = 2.0 * shape.n_params * (config.n_dp - 1)
    tp = 4.0 * shape.n_layers * shape.batch * (
        shape.d_ff * (n_tp_m - 1) + shape.d_model * (n_tp_f - 1))
    pp = 2.0 * shape.batch * shape.d_model * (stages - 1)
    ep = 2.0 * shape.batch * shape.d_model * (shape.n_layers - stages) \
        * (1.0 - 1.0 / config.n_ep)
    return CommVolumes(dp=dp, tp=tp, pp=pp, ep=ep)


# ---------------------------------------------------------------------------
# point-to-point level frequencies


def _pp_interface_levels(n_layers: int, pp_factors: tuple[int, ...],
                         interleave: int) -> list[int]:
    """Count of virtual-stage interfaces whose endpoints straddle exactly
    network level h, indexed 0..H (0 = same GPU, never used by stage
    interfaces).  Sums to N_PP·i − 1.

    Consecutive virtual stages sit on consecutive pipeline ranks (mixed-radix
    over the level factors, fastest level least significant), wrapping to
    rank 0 between interleave passes; a hop from rank r to r+1 mod N_PP needs
    the lowest level whose group still contains both.  Closed form: one
    interleave pass makes N/c(h−1) − N/c(h) hops at exactly level h (c(h) =
    cumulative group size through h), and each of the i−1 wrap-arounds hops
    at the lowest level spanning the whole pipeline dimension.
    """
    H = len(pp_factors)
    counts = [0] * (H + 1)
    n_pp = math.prod(pp_factors)
    if n_pp == 1:
        return counts
    cum = 1
    wrap_level = None
    for h in range(1, H + 1):
        prev = cum
        cum *= pp_factors[h - 1]
        counts[h] = interleave * (n_pp // prev - n_pp // cum)
        if wrap_level is None and cum == n_pp:
            wrap_level = h
    counts[wrap_level] += interleave - 1
    return counts


def _ep_level_probs(ep_factors: tuple[int, ...]) -> list[float]:
    """P(an expert hop between two uniform, independent expert picks needs
    exactly level h), indexed 0..H.  P[0] = 1/N_EP (same expert coordinate
    group at every level); the rest telescope to 1 − 1/N_EP."""
    H = len(ep_factors)
    n_ep = math.prod(ep_factors)
    probs = [0.0] * (H + 1)
    probs[0] = 1.0 / n_ep
    cum = 1
    for h in range(1, H + 1):
        prev = cum
        cum *= ep_factors[h - 1]
        probs[h] = (cum - prev) / n_ep  # same above h, differs at h
    return probs


def p2p_frequencies(n_layers: int, pp_factors: tuple[int, ...],
                    interleave: int, ep_factors: tuple[int, ...],
                    exact: bool = False) -> tuple:
    """Distribution over network levels of the point-to-point hop needed at a
    uniformly random block interface, P[0..H] (0 = stays on the GPU).

    Combines the deterministic pipeline interface placement with uniform
    expert routing: the hop level is the max of the pipeline level and the
    expert level.  Sums to exactly 1 (returned as ``fractions.Fraction``
    values when ``exact`` is set, floats otherwise).
    """
    if len(pp_factors) != len(ep_factors):
        raise CommError("pp and ep factorizations must cover the same levels")
    H = len(pp_factors)
    one = Fraction(1) if exact else 1.0
    if n_layers == 1:
        out = [one * 0] * (H + 1)
        out[0] = one
        return tuple(out)
    stages = math.prod(pp_factors) * interleave
    if stages > n_layers or n_layers % stages != 0:
        raise CommError(f"{stages} virtual stages cannot tile {n_layers} blocks")
    pp_counts = _pp_interface_levels(n_layers, pp_factors, interleave)
    pp_counts[0] = n_layers - stages  # interfaces internal to a stage
    n_ep = math.prod(ep_factors)
    if exact:
        ep_probs = [Fraction(1, n_ep)]
        cum = 1
        for f in ep_factors:
            prev, cum = cum, cum * f
            ep_probs.append(Fraction(cum - prev, n_ep))
    else:
        ep_probs = _ep_level_probs(ep_factors)
    out = [one * 0] * (H + 1)
    denom = n_layers - 1
    for h_pp, c in enumerate(pp_counts):
        if c == 0:
            continue
        share = Fraction(c, denom) if exact else c / denom
        for h_ep, p in enumerate(ep_probs):
            if p == 0:
                continue
            out[max(h_pp, h_ep)] += share * p
    return tuple(out)


# ---------------------------------------------------------------------------
# hierarchical all-reduce and assembled per-step times


def hierarchical_allreduce(words: float, factors: tuple[int, ...],
                           levels: tuple[NetworkLevel, ...]) -> tuple[float, tuple[int, ...]]:
    """Time and per-level serial latency events for an all-reduce of
    ``words`` words whose group factorizes as ``factors`` across ``levels``.

    Per level: 2·w·(f−1)/f received at that level's per-GPU bandwidth; two
    serial latency events (reduce and broadcast phases) per active level.
    An 8×4 split over (B1, B2) costs (2w·7/8)/B1 + (2w·3/4)/B2.
    """
    if len(factors) != len(levels):
        raise CommError("need one group factor per network level")
    t = 0.0
    events = []
    for f, lvl in zip(factors, levels):
        if f < 1:
            raise CommError("group factors must be >= 1")
        if f == 1:
            events.append(0)
            continue
        t += allreduce_words_per_gpu(words, f) / lvl.unidirectional_bandwidth_per_gpu
        events.append(2)
    return t, tuple(events)


@dataclass(frozen=True)
class OverlapPolicy:
    """How much of each communication category hides under compute.

    By default everything overlaps fully: per-microbatch traffic hides under
    the matmuls, and the optimizer-step gradient all-reduce hides under the
    next step's forward work and the pipeline fill/drain (it still bounds the
    step from below through the max() in the composition).  Set
    ``dp_overlap_fraction=0`` to model a strict synchronous optimizer step
    where the gradient exchange is serialized after compute.
    """
    dp_overlap_fraction: float = 1.0
    ndp_overlap_fraction: float = 1.0

    def __post_init__(self):
        for f in (self.dp_overlap_fraction, self.ndp_overlap_fraction):
            if not (0.0 <= f <= 1.0):
                raise CommError("overlap fractions must be in [0, 1]")


@dataclass(frozen=True)
class CommTimes:
    """Per-GPU, per-step communication times (seconds), split by
    overlappability, plus the serial latency account."""
    t_dp: float
    t_tp: float
    t_pp: float
    t_ep: float
    t_dp_overlap: float
    t_dp_exposed: float
    t_ndp_overlap: float
    t_ndp_exposed: float
    t_latency: float
    latency_events: tuple[int, ...]  # per network level

    @property
    def t_exposed(self) -> float:
        return self.t_dp_exposed + self.t_ndp_exposed

    @property
    def total_bandwidth_time(self) -> float:
        return self.t_dp + self.t_tp + self.t_pp + self.t_ep


def comm_times(shape, config, cluster: ClusterSpec,
               policy: OverlapPolicy | None = None) -> CommTimes:
    """Assemble per-GPU communication times for one optimizer step."""
    policy = policy or OverlapPolicy()
    net = cluster.network
    H = len(net)
    lv = config.levels
    n_tp = config.n_tp_ff * config.n_tp_model
    n_gpu = config.n_gpu
    zero_bubble = config.schedule == "zero-bubble"

    # --- data parallel: one all-reduce of the local parameter shard
    shard = shape.n_params / (n_tp * config.n_pp * config.n_ep)
    t_dp, dp_events = hierarchical_allreduce(shard, lv.dp, net)

    # --- tensor parallel: 2 all-reduces per sliced dim per block visit
    visits = config.microbatches * (shape.n_layers // config.n_pp) \
        * (shape.n_experts // config.n_ep)
    b_nano = shape.batch // (shape.n_experts * config.n_dp * config.microbatches)
    d_ff_loc = shape.d_ff // config.n_tp_ff
    d_model_loc = shape.d_model // config.n_tp_model
    t_ar_m, ev_m = hierarchical_allreduce(d_ff_loc * b_nano, lv.tp_model, net)
    t_ar_f, ev_f = hierarchical_allreduce(d_model_loc * b_nano, lv.tp_ff, net)
    t_tp = visits * 2.0 * (t_ar_m + t_ar_f)
    # one serial event per all-reduce per level it spans: 2 all-reduces per
    # sliced dim per visit → 4·(blocks/device)·m total on a fully sliced block
    tp_events = [visits * (em + ef) for em, ef in zip(ev_m, ev_f)]

    # --- pipeline + expert point-to-point
    stages = config.n_pp * config.interleave
    pp_counts = _pp_interface_levels(shape.n_layers, lv.pp, config.interleave)
    ep_probs = _ep_level_probs(lv.ep)
    act_words = 2.0 * shape.batch * shape.d_model / n_gpu  # fwd + bwd, per GPU share
    t_pp = sum(act_words * pp_counts[h] / net[h - 1].unidirectional_bandwidth_per_gpu
               for h in range(1, H + 1))
    non_stage = shape.n_layers - stages
    t_ep = sum(act_words * non_stage * ep_probs[h]
               / net[h - 1].unidirectional_bandwidth_per_gpu
               for h in range(1, H + 1))

    # --- serial latency events per level
    events = [0] * H
    for h in range(H):
        events[h] += dp_events[h]
    if not (zero_bubble and config.n_pp > 1):
        # The zero-bubble waiver hides TP/P2P latency in deferred
        # weight-gradient slack — slack a one-stage "pipeline" does not have.
        for h in range(H):
            events[h] += tp_events[h]
        # fill + drain: one event per stage interface, worst-case expert level
        h_ep = max((h for h in range(1, H + 1) if lv.ep[h - 1] > 1), default=0)
        for h in range(1, H + 1):
            if pp_counts[h]:
                events[max(h, h_ep) - 1] += 2 * int(pp_counts[h])
    t_latency = sum(e * net[h].one_way_latency for h, e in enumerate(events))

    t_ndp = t_tp + t_pp + t_ep
    return CommTimes(
        t_dp=t_dp, t_tp=t_tp, t_pp=t_pp, t_ep=t_ep,
        t_dp_overlap=t_dp * policy.dp_overlap_fraction,
        t_dp_exposed=t_dp * (1.0 - policy.dp_overlap_fraction),
        t_ndp_overlap=t_ndp * policy.ndp_overlap_fraction,
        t_ndp_exposed=t_ndp * (1.0 - policy.ndp_overlap_fraction),
        t_latency=t_latency,
        latency_events=tuple(events),
    )
