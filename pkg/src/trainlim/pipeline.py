"""Pipeline schedules: bubble fractions and stage placement.

Bubble fraction f_b is the idle share of a pipeline-stage device's step
timeline.  With N_PP stages, m microbatches, and i interleaved passes
(each device holds i non-contiguous chunks of the layer stack):

    naive (GPipe-like, i = 1):   f_b = (N_PP − 1) / (N_PP − 1 + m)
    interleaved:                 f_b = (N_PP − 1 + z) / (N_PP − 1 + z + i·m)
                                 z = (i − 1) · max(0, N_PP − m)
    zero-bubble:                 f_b = 0, needs m ≥ 2·N_PP − 1

Interleaving with plenty of microbatches (m ≥ N_PP) divides the fill/drain
cost by i; starved pipelines (m < N_PP) pay an extra re-fill penalty z per
pass, which is what the discrete-event oracle in the test suite reproduces
slot-for-slot.  Zero-bubble schedules split the backward pass and fill the
bubble with deferred weight-gradient work; the microbatch floor is the
fill depth that makes this bookkeeping close.  The memory-pressure flag is
advisory only.
"""

from __future__ import annotations

SCHEDULES = ("naive", "interleaved", "zero-bubble")


class ScheduleError(ValueError):
    """Schedule parameters are structurally infeasible."""


def bubble_fraction(schedule: str, n_pp: int, m: int, interleave: int = 1) -> float:
    if n_pp < 1 or m < 1 or interleave < 1:
        raise ScheduleError("n_pp, m, interleave must all be >= 1")
    if schedule == "naive":
        if interleave != 1:
            raise ScheduleError("naive schedule has no interleaving")
        return (n_pp - 1) / (n_pp - 1 + m)
    if schedule == "interleaved":
        z = (interleave - 1) * max(0, n_pp - m)
        fill = (n_pp - 1) + z
        return fill / (fill + interleave * m)
    if schedule == "zero-bubble":
        if m < 2 * n_pp - 1:
            raise ScheduleError(
                f"zero-bubble needs m >= 2·N_PP−1 = {2 * n_pp - 1}, got {m}")
        return 0.0
    raise ScheduleError(f"unknown schedule {schedule!r}; pick from {SCHEDULES}")


def zero_bubble_memory_ok(n_pp: int, m: int, blocks_per_stage: int) -> bool:
    """Advisory: deferred weight-gradient activations for up to 2·N_PP−1
    in-flight microbatches must be stashable; flag only, never enforced."""
    return m >= 2 * n_pp - 1 and blocks_per_stage >= 1


def block_to_stage(block: int, n_layers: int, n_pp: int, interleave: int = 1) -> int:
    """Physical stage (device rank in the pipeline dimension) owning a block.

    Blocks are dealt round-robin in chunks of L/(N_PP·i): chunk c goes to
    stage c mod N_PP, so each device owns i scattered chunks.
    """
    stages = n_pp * interleave
    if n_layers % stages != 0:
        raise ScheduleError(f"{stages} virtual stages cannot tile {n_layers} blocks")
    if not (0 <= block < n_layers):
        raise ScheduleError(f"block {block} outside [0, {n_layers})")
    chunk = n_layers // stages
    return (block // chunk) % n_pp


def virtual_stage_interfaces(n_pp: int, interleave: int = 1) -> int:
    """Number of stage-to-stage handoffs a microbatch makes one way."""
    return n_pp * interleave - 1
