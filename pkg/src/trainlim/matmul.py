"""Roofline-with-tiling model for a single matmul kernel on one device.

An (m, k, n) matmul (output m×n, contraction dim k) is timed as

    total = t_latency + max(t_arith, max_level t_mem[level])

i.e. perfect overlap between arithmetic and every memory level, plus a
serial kernel-launch latency floor.  Arithmetic is m·k·n MACs at the
sustained rate C·scf.  Traffic per level:

    DRAM       m·k + k·n + m·n                       (each matrix once)
    L2         (n/T_n)·m·k + (m/T_m)·k·n + m·n       with the SM tile
    SharedMem  same with the warp tile

The tile factors are the classic output-stationary reuse argument: an
output tile of T_m×T_n streams the full A panel n/T_n times (and B m/T_m
times) through the level that feeds the tile.  Tiles clip to the problem
size, so a skinny matmul loses reuse exactly as it should.  Registers are
capacity-only and contribute no traffic term.

Operands can be declared DRAM-resident ("a", "b", "out"): their words are
dropped from the DRAM term only.  The simulator uses this for the
weights-in-SRAM regime, where weight matrices never touch DRAM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .hwspec import DeviceSpec


@dataclass(frozen=True)
class MatmulTime:
    t_arith: float
    t_per_level: tuple[tuple[str, float], ...]  # (level name, seconds)
    t_latency: float
    total: float
    bound_by: str  # "arith" or a memory level name

    @property
    def utilization(self) -> float:
        """Fraction of peak arithmetic achieved (includes the clock factor)."""
        return self.t_arith / self.total if self.total > 0 else 1.0


def _level_words(level_name: str, m: int, k: int, n: int,
                 device: DeviceSpec, skip_dram: frozenset[str]) -> float:
    if level_name == "DRAM":
        words = 0.0
        if "a" not in skip_dram:
            words += m * k
        if "b" not in skip_dram:
            words += k * n
        if "out" not in skip_dram:
            words += m * n
        return words
    if level_name == "L2":
        tile = device.sm_tile
    elif level_name == "SharedMem":
        tile = device.warp_tile
    else:  # Registers: capacity only
        return 0.0
    t_m = min(tile[0], m)
    t_n = min(tile[1], n)
    return (n / t_n) * m * k + (m / t_m) * k * n + m * n


@lru_cache(maxsize=1 << 18)
def _matmul_time(m: int, k: int, n: int, device: DeviceSpec,
                 dram_resident: frozenset[str]) -> MatmulTime:
    t_arith = (m * k * n) / (device.peak_arithmetic * device.sustained_clock_factor)
    per_level = []
    for lvl in device.memory_levels:
        words = _level_words(lvl.name, m, k, n, device, dram_resident)
        per_level.append((lvl.name, words / lvl.unidirectional_bandwidth))
    t_latency = device.kernel_latency + sum(l.access_latency for l in device.memory_levels)
    bound_by, t_max = "arith", t_arith
    for name, t in per_level:
        if t > t_max:
            bound_by, t_max = name, t
    return MatmulTime(t_arith=t_arith, t_per_level=tuple(per_level),
                      t_latency=t_latency, total=t_latency + t_max,
                      bound_by=bound_by)


def matmul_time(shape: tuple[int, int, int], device: DeviceSpec,
                dram_resident: tuple[str, ...] = ()) -> MatmulTime:
    """Time one (m, k, n) matmul kernel on ``device``.

    ``dram_resident`` names operands ("a" = m×k, "b" = k×n, "out" = m×n)
    whose DRAM traffic is elided because they live permanently on-chip.
    """
    m, k, n = shape
    if min(m, k, n) < 1:
        raise ValueError(f"matmul dims must be >= 1, got {shape}")
    bad = set(dram_resident) - {"a", "b", "out"}
    if bad:
        raise ValueError(f"unknown operand tags {sorted(bad)}")
    return _matmul_time(int(m), int(k), int(n), device, frozenset(dram_resident))


def balanced_square_dim(device: DeviceSpec, word_size: int | None = None) -> int:
    """Smallest square dim d where a d³ matmul stops being DRAM-bound.

    Balance point: arithmetic d³/C against DRAM traffic 3·d²·word_size
    bytes, giving d = 3·C·word_size / B_DRAM_bytes (ceiling).  For an
    8-bit-word device at 1e15 MAC/s with 3.35e12 B/s of DRAM this lands on
    896.
    """
    ws = device.word_size if word_size is None else word_size
    b_dram_bytes = device.dram.unidirectional_bandwidth * device.word_size
    return math.ceil(3.0 * device.peak_arithmetic * ws / b_dram_bytes)
