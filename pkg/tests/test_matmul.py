"""Single-GPU matmul timing: latency, memory, and arithmetic regimes."""

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trainlim.hwspec import DeviceSpec, MemoryLevel, preset
from trainlim.matmul import balanced_square_dim, matmul_time

A100 = preset("dgx-a100").device
H100 = preset("dgx-h100").device
LEVEL_NAMES = {"DRAM", "L2", "SharedMem", "Registers"}


def level_time(t, name):
    return dict(t.t_per_level)[name]


def test_tiny_matmul_is_all_launch_latency():
    t = matmul_time((8, 8, 8), A100)
    assert t.total == pytest.approx(4.5e-6, rel=0.10)
    assert t.t_latency / t.total > 0.99


def test_falcon_feedforward_shard_about_one_ms():
    # 12288 x 6144 x 2048 per-GPU shard on an A100 takes ~1 ms
    t = matmul_time((12288, 6144, 2048), A100)
    assert 1e-3 / 1.5 <= t.total <= 1e-3 * 1.5


def test_large_square_matmul_is_arithmetic_bound():
    t = matmul_time((8192, 8192, 8192), H100)
    assert t.bound_by == "arith"
    t_ideal = 8192**3 / H100.peak_arithmetic
    assert t_ideal / t.total >= 0.9
    assert t.utilization >= 0.9


def test_total_is_latency_plus_max_component():
    t = matmul_time((4096, 4096, 4096), A100)
    worst_level = max(x for _, x in t.t_per_level)
    assert t.total == pytest.approx(t.t_latency + max(t.t_arith, worst_level))
    assert t.t_latency == A100.kernel_latency


def test_balanced_square_dim_8bit_h100():
    # C = 1e15 MAC/s at 1-byte words, DRAM 3.35e12 B/s -> d' = ceil(3C/B) = 896
    dev8 = DeviceSpec(
        name="h100-8bit",
        peak_arithmetic=1e15,
        memory_levels=(
            MemoryLevel("DRAM", 8e10, 3.35e12),
            H100.memory_levels[1],
            H100.memory_levels[2],
            H100.memory_levels[3],
        ),
        word_size=1,
    )
    d = balanced_square_dim(dev8)
    assert abs(d - 896) <= 16


def test_balanced_square_dim_marks_dram_balance():
    """At d' the DRAM time of a d'xd'xd' matmul equals the arithmetic time."""
    d = balanced_square_dim(A100)
    t = matmul_time((d, d, d), A100)
    t_arith = d**3 / A100.peak_arithmetic
    t_dram = 3 * d * d / A100.dram.unidirectional_bandwidth
    assert t_dram == pytest.approx(t_arith, rel=0.05)
    assert level_time(t, "DRAM") == pytest.approx(t_dram)


def test_dram_resident_operands_skip_traffic():
    shape = (2048, 2048, 2048)
    base = matmul_time(shape, A100)
    resident = matmul_time(shape, A100, dram_resident=("a", "b", "out"))
    assert level_time(resident, "DRAM") == 0.0
    assert resident.total <= base.total
    with pytest.raises(ValueError):
        matmul_time(shape, A100, dram_resident=("weights",))


def test_doubling_dram_bandwidth_halves_dram_time():
    fast_dram = dataclasses.replace(
        A100.memory_levels[0],
        unidirectional_bandwidth=2 * A100.memory_levels[0].unidirectional_bandwidth,
    )
    fast = dataclasses.replace(A100, memory_levels=(fast_dram,) + A100.memory_levels[1:])
    shape = (512, 512, 512)
    assert level_time(matmul_time(shape, fast), "DRAM") == pytest.approx(
        level_time(matmul_time(shape, A100), "DRAM") / 2
    )


@given(
    st.integers(min_value=1, max_value=4096),
    st.integers(min_value=1, max_value=4096),
    st.integers(min_value=1, max_value=4096),
)
@settings(max_examples=80, deadline=None)
def test_time_components_positive_and_floored(m, k, n):
    t = matmul_time((m, k, n), A100)
    assert t.total >= A100.kernel_latency
    assert t.t_arith == pytest.approx(m * k * n / A100.peak_arithmetic)
    assert all(x >= 0 for _, x in t.t_per_level)
    assert t.bound_by == "arith" or t.bound_by in LEVEL_NAMES


@given(st.integers(min_value=6, max_value=13))
@settings(max_examples=8, deadline=None)
def test_monotone_in_size(p):
    small = matmul_time((2**p, 2**p, 2**p), H100)
    big = matmul_time((2 ** (p + 1), 2**p, 2**p), H100)
    assert big.total >= small.total
