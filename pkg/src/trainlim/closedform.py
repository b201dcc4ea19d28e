"""Closed-form critical scales: where communication or latency takes over.

Everything here works at node granularity: a node of aggregate arithmetic
rate C (MAC/s), external network bandwidth B_net (words/s), DRAM bandwidth
B_DRAM (words/s), and on-chip SRAM S (words), running blocks of d'×d'
matmuls at nanobatch b'.

  * Critical block dimension  d' = 4·C / (3·B_net): the largest square
    block a node can own before tensor-parallel all-reduces outpace its
    arithmetic (three sliced matrices, 4/3 geometry factor).
  * Critical nanobatch        b' = 16 when S ≥ 4·d'² (weights live in
    SRAM; the schedule only needs a small activation tile), else
    b' = C / B_DRAM (every weight read from DRAM must amortize).
  * Critical cluster size     N = (1/(4·L·E)) · b·N_p / (d'²·b'): the node
    count at which the model is sliced down to exactly (d', b') work units.
  * Bandwidth-critical compute: solving the above against the compute
    identity T = 60·N_p²/E (MAC) for a run finishing in t_train:

        T_bw  = (1/(960·E)) · ((b/L) · C·t_train / (d'²·b'))²    [MAC]

  * Latency-critical compute: replacing the node-throughput term with the
    serial-latency chain t_L per block step:

        T_lat = (1/(960·E)) · ((b/L) · t_train / t_L)²           [MAC]

  * Hard latency wall (dropping all bandwidth terms, overlapping
    everything, the 9× headroom of the serial chain):

        N_p_max = (b/L) · t_train / (80 · t_L)
        T_max   = (3/(320·E)) · ((b/L) · t_train / t_L)²         [MAC]
                = 9 · T_lat exactly.

Batch-ratio growth: with b/L = (b0/L0)·(T/T0)^alpha the critical-compute
equations become self-referential and solve to

        T(alpha) = [ T(0)-form with (b0/L0)·T0^(−alpha) ]^(1/(1−2·alpha))

which diverges at alpha = 1/2 — if batch keeps growing that fast there is
no wall.  All public values are FLOP; internal algebra is MAC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .hwspec import ClusterSpec
from .units import THREE_MONTHS_S, mac_to_flop

#: Reference shape ratios used when no model shape is pinned: today's
#: frontier-ish batch (tokens) over layer count.
REF_BATCH = 4e6
REF_LAYERS = 100.0


class ClosedFormError(ValueError):
    pass


@dataclass(frozen=True)
class NodeParams:
    """Node-level aggregates extracted from a cluster spec."""
    node_gpus: int
    arithmetic: float       # MAC/s
    net_bandwidth: float    # words/s leaving the node, aggregate
    dram_bandwidth: float   # words/s, aggregate
    sram: float             # words, aggregate non-DRAM capacity
    chain_latency: float    # s, kernel + one-way hop at every level


def node_params(cluster: ClusterSpec) -> NodeParams:
    """Collapse a cluster spec to the node quantities the closed forms use.

    The node is the level-1 domain (1 GPU if the only level is unbounded);
    its external bandwidth is the per-GPU injection bandwidth of the first
    level above the node, aggregated over the node.
    """
    dev = cluster.device
    node = cluster.node_size()
    above = cluster.network[1] if cluster.levels > 1 else cluster.network[0]
    return NodeParams(
        node_gpus=node,
        arithmetic=dev.peak_arithmetic * node,
        net_bandwidth=above.unidirectional_bandwidth_per_gpu * node,
        dram_bandwidth=dev.dram.unidirectional_bandwidth * node,
        sram=dev.sram_capacity() * node,
        chain_latency=cluster.chain_latency(),
    )


def critical_d(arithmetic: float, net_bandwidth: float) -> float:
    """Largest square block dim a node can own before TP communication
    outpaces its arithmetic: d' = 4C/(3B)."""
    return 4.0 * arithmetic / (3.0 * net_bandwidth)


def critical_nanobatch(arithmetic: float, dram_bandwidth: float,
                       sram: float, d_prime: float) -> tuple[float, bool]:
    """(b', weights-in-SRAM?) — 16 in the SRAM regime, C/B_DRAM otherwise."""
    sram_regime = (d_prime == 0.0) or (sram / d_prime ** 2 >= 4.0)
    if sram_regime:
        return 16.0, True
    return arithmetic / dram_bandwidth, False


def critical_cluster(batch: float, layers: float, experts: float,
                     n_params: float, d_prime: float, b_prime: float) -> float:
    """Node count at which the whole model is sliced to (d', b') units."""
    if d_prime == 0.0:
        return math.inf
    return batch * n_params / (4.0 * layers * experts * d_prime ** 2 * b_prime)


def _self_consistent(t0_mac_form: float, alpha: float, T0_flop: float,
                     ratio: float, x: float, experts: float) -> float:
    """Solve T = K·((b/L)(T)·x)² with b/L = ratio·(T/T0)^alpha, in FLOP."""
    if alpha >= 0.5:
        raise ClosedFormError(
            f"batch-growth exponent {alpha} >= 1/2: critical compute diverges")
    base_flop = mac_to_flop(t0_mac_form / experts
                            * (ratio * T0_flop ** (-alpha) * x) ** 2)
    if base_flop == 0.0 or math.isinf(base_flop):
        return base_flop
    return base_flop ** (1.0 / (1.0 - 2.0 * alpha))


def t_critical_bandwidth(np_: NodeParams, batch: float = REF_BATCH,
                         layers: float = REF_LAYERS, experts: float = 1.0,
                         t_train: float = THREE_MONTHS_S,
                         alpha: float = 0.0, T0_flop: float = 3e23) -> float:
    """Largest training compute (FLOP) before the network-bandwidth terms
    force utilization down, for a run of t_train seconds."""
    d_p = critical_d(np_.arithmetic, np_.net_bandwidth)
    if d_p == 0.0:
        return math.inf
    b_p, _ = critical_nanobatch(np_.arithmetic, np_.dram_bandwidth, np_.sram, d_p)
    x = np_.arithmetic * t_train / (d_p ** 2 * b_p)
    return _self_consistent(1.0 / 960.0, alpha, T0_flop, batch / layers, x, experts)


def t_critical_latency(np_: NodeParams, batch: float = REF_BATCH,
                       layers: float = REF_LAYERS, experts: float = 1.0,
                       t_train: float = THREE_MONTHS_S,
                       alpha: float = 0.0, T0_flop: float = 3e23) -> float:
    """Largest training compute (FLOP) before serial per-block latency
    alone forces the step time over budget."""
    x = t_train / np_.chain_latency
    return _self_consistent(1.0 / 960.0, alpha, T0_flop, batch / layers, x, experts)


def latency_wall(np_: NodeParams, batch: float = REF_BATCH,
                 layers: float = REF_LAYERS, experts: float = 1.0,
                 t_train: float = THREE_MONTHS_S,
                 alpha: float = 0.0, T0_flop: float = 3e23) -> tuple[float, float]:
    """(T_limit FLOP, N_p_limit) — the hard wall with every bandwidth term
    stripped away; T_limit = 9 × t_critical_latency exactly (3/320 vs
    1/960 — the 9 is computed literally so the identity is bit-exact)."""
    if alpha == 0.0:
        t_lim = 9.0 * t_critical_latency(np_, batch, layers, experts,
                                         t_train, 0.0, T0_flop)
    else:
        t_lim = _self_consistent(9.0 / 960.0, alpha, T0_flop, batch / layers,
                                 t_train / np_.chain_latency, experts)
    if math.isinf(t_lim):
        return t_lim, math.inf
    n_p = math.sqrt(t_lim / 2.0 * experts / 60.0)
    return t_lim, n_p


@dataclass(frozen=True)
class ClosedFormReport:
    cluster: str
    node: NodeParams
    batch: float
    layers: float
    experts: float
    t_train_s: float
    alpha: float
    d_prime: float
    b_prime: float
    sram_regime: bool
    n_critical_nodes: float          # at T_critical_bandwidth's own shape
    t_critical_bandwidth_flop: float
    t_critical_latency_flop: float
    t_limit_flop: float
    n_p_limit: float
    operative_limit_flop: float      # min of the two critical computes


def closed_form_report(cluster: ClusterSpec, batch: float = REF_BATCH,
                       layers: float = REF_LAYERS, experts: float = 1.0,
                       t_train: float = THREE_MONTHS_S,
                       alpha: float = 0.0) -> ClosedFormReport:
    """Full closed-form analysis of a cluster preset."""
    if experts < 1:
        raise ClosedFormError("expert count must be >= 1")
    np_ = node_params(cluster)
    d_p = critical_d(np_.arithmetic, np_.net_bandwidth)
    b_p, sram_regime = critical_nanobatch(np_.arithmetic, np_.dram_bandwidth,
                                          np_.sram, d_p)
    t_bw = t_critical_bandwidth(np_, batch, layers, experts, t_train, alpha)
    t_lat = t_critical_latency(np_, batch, layers, experts, t_train, alpha)
    t_lim, n_p_lim = latency_wall(np_, batch, layers, experts, t_train, alpha)
    if math.isinf(t_bw):
        n_crit = math.inf
    else:
        n_p_at_crit = math.sqrt(t_bw / 2.0 * experts / 60.0)
        n_crit = critical_cluster(batch, layers, experts, n_p_at_crit, d_p, b_p)
    return ClosedFormReport(
        cluster=cluster.name, node=np_, batch=batch, layers=layers,
        experts=experts, t_train_s=t_train, alpha=alpha,
        d_prime=d_p, b_prime=b_p, sram_regime=sram_regime,
        n_critical_nodes=n_crit,
        t_critical_bandwidth_flop=t_bw, t_critical_latency_flop=t_lat,
        t_limit_flop=t_lim, n_p_limit=n_p_lim,
        operative_limit_flop=min(t_bw, t_lat))
