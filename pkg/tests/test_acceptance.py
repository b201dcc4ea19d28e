"""Acceptance gate: one test per advertised guarantee.

Each test here pins a headline capability end to end — closed-form
reference numbers, oracle-exact communication and pipeline math, matmul
timing anchors, search optimality, and the full three-month sweep
endpoints.  `pytest -v tests/test_acceptance.py` prints one pass/fail
line per guarantee.
"""

import itertools
import math
import subprocess
import sys
import time
from fractions import Fraction

import pytest

import oracles
from trainlim.closedform import closed_form_report, latency_wall, node_params
from trainlim.comm import (
    OverlapPolicy,
    allreduce_words_per_gpu,
    hierarchical_allreduce,
    p2p_frequencies,
    slicing_volume,
)
from trainlim.hwspec import DeviceSpec, MemoryLevel, NetworkLevel, preset
from trainlim.matmul import balanced_square_dim, matmul_time
from trainlim.pipeline import block_to_stage, bubble_fraction
from trainlim.scaling import LAW_PRESETS, make_shape, shape_from_compute
from trainlim.search import best_config, find_endpoint, log_points, min_cluster, sweep
from trainlim.units import THREE_MONTHS_S


def one_sf(x: float) -> float:
    exp = math.floor(math.log10(abs(x)))
    return round(x / 10**exp) * 10**exp


def oom(x: float, ref: float) -> float:
    return abs(math.log10(x / ref))


# ---------------------------------------------------------------------------
# closed forms


def test_critical_value_table():
    """d', b', and the bandwidth compute ceiling for the four reference
    systems, at three months = 7.889e6 s, computed in milliseconds."""
    assert abs(THREE_MONTHS_S - 7.889e6) < 1e3
    rows = {
        "dgx1-v100": (26.7e3, 277.8, 1e27),
        "dgx-a100": (16.7e3, 403.0, 3e28),
        "dgx-h100": (26.4e3, 591.0, 2e28),
        "dgx-h100-superpod": (5.9e3, 16.0, 1e34),
    }
    t0 = time.perf_counter()
    reports = {name: closed_form_report(preset(name)) for name in rows}
    elapsed = time.perf_counter() - t0
    for name, (d_prime, b_prime, t_crit) in rows.items():
        r = reports[name]
        assert r.d_prime == pytest.approx(d_prime, rel=0.02), name
        if name == "dgx-h100-superpod":
            assert r.b_prime == 16.0
        else:
            assert r.b_prime == pytest.approx(b_prime, rel=0.02), name
        assert one_sf(r.t_critical_bandwidth_flop) == pytest.approx(t_crit), name
    assert elapsed < 0.1, f"closed forms took {elapsed:.3f}s, expected milliseconds"


def test_boxed_training_limits():
    """b = 4e6, L = 100, E = 1, t_L = 9 us on an H100 node: latency ceiling
    3e30 FLOP, wall at N_p = 4e14 and T_limit = 2e31, ratio exactly 9."""
    r = closed_form_report(preset("dgx-h100"))
    assert node_params(preset("dgx-h100")).chain_latency == pytest.approx(9e-6)
    assert (r.batch, r.layers, r.experts) == (4e6, 100.0, 1.0)
    assert one_sf(r.t_critical_latency_flop) == pytest.approx(3e30)
    assert one_sf(r.n_p_limit) == pytest.approx(4e14)
    assert one_sf(r.t_limit_flop) == pytest.approx(2e31)
    assert r.t_limit_flop / r.t_critical_latency_flop == pytest.approx(9.0, rel=1e-12)


def test_batch_growth_sensitivity():
    """Batch growing as T^0.2 buys ~3 orders of magnitude of bandwidth
    ceiling on the H100, and pushes the optimistic wall to ~3e36 FLOP."""
    base = closed_form_report(preset("dgx-h100"))
    adj = closed_form_report(preset("dgx-h100"), alpha=0.2)
    gained = math.log10(adj.t_critical_bandwidth_flop / base.t_critical_bandwidth_flop)
    assert 2.5 <= gained <= 3.5
    assert 3e36 / 3 <= adj.t_limit_flop <= 3e36 * 3


# ---------------------------------------------------------------------------
# communication calculus


def test_communication_calculus_oracles():
    """All-reduce and sliced-matmul volumes equal per-rank message-ledger
    oracles on every group size up to 8; point-to-point level frequencies
    match a 10^6-sample Monte-Carlo router within 3 sigma on six
    hierarchies; every exact distribution sums to 1 as rationals."""
    for n in range(1, 9):
        for words in (1, 100, 840):
            want = oracles.ring_allreduce_received(words, n)
            assert allreduce_words_per_gpu(words, n) == pytest.approx(float(want))

    dims = (24, 24, 24)
    splits = [s for s in itertools.product((1, 2, 3, 4, 6, 8), repeat=3)
              if s[0] * s[1] * s[2] <= 8]
    assert len(splits) >= 20
    for n_i, n_j, n_k in splits:
        got = slicing_volume(*dims, n_i, n_j, n_k)
        want = oracles.slicing_received(*dims, n_i, n_j, n_k)
        assert got == pytest.approx(float(want)), (n_i, n_j, n_k)

    levels = (NetworkLevel(1, 8, 1.0, 0.0), NetworkLevel(2, 64, 1.0, 0.0))
    pairs = [(f1, f2) for f1 in (1, 2, 3, 4, 8) for f2 in (1, 2, 3, 4, 8)
             if f1 * f2 <= 8]
    for factors in pairs:
        t, _ = hierarchical_allreduce(840.0, factors, levels)
        assert t == pytest.approx(float(oracles.hierarchical_received(840, factors)))

    hierarchies = [
        (12, (3, 2), 1, (1, 1)),
        (12, (2, 2), 1, (2, 1)),
        (16, (2, 2), 2, (1, 2)),
        (24, (2, 2, 2), 1, (2, 2, 2)),
        (36, (3, 2), 3, (1, 6)),
        (8, (1, 1), 1, (2, 2)),
    ]
    n_samples = 10**6
    for case in hierarchies:
        exact = p2p_frequencies(*case, exact=True)
        assert sum(exact) == Fraction(1)
        assert all(isinstance(p, Fraction) for p in exact)
        mc = oracles.mc_p2p_frequencies(*case, n_samples=n_samples, seed=0)
        for h, p in enumerate(exact):
            if p == 0:
                assert mc[h] == 0.0, case
                continue
            sigma = math.sqrt(float(p) * (1 - float(p)) / n_samples)
            assert abs(mc[h] - float(p)) <= 3 * sigma, (case, h)
    assert sum(p2p_frequencies(1, (2, 2), 1, (1, 1), exact=True)) == Fraction(1)


# ---------------------------------------------------------------------------
# pipeline schedules


def test_pipeline_schedule_oracle():
    """Bubble formulas equal a discrete-event pipeline simulation exactly
    over depth <= 6, microbatches <= 12, interleave in {1,2,3}; the stage
    maps reproduce both 12-block worked examples."""
    for n_pp in range(1, 7):
        for m in range(1, 13):
            for i in (1, 2, 3):
                want = oracles.simulate_bubble_fraction(n_pp, m, i)
                got = bubble_fraction("interleaved", n_pp, m, interleave=i)
                assert Fraction(got).limit_denominator(10**9) == want, (n_pp, m, i)
    assert [block_to_stage(l, 12, 3, 1) for l in range(12)] == \
        [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]
    assert [block_to_stage(l, 12, 3, 2) for l in range(12)] == \
        [0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2]


# ---------------------------------------------------------------------------
# matmul timing anchors


def test_matmul_time_model():
    """Launch-latency floor at 8x8x8, the published ~1 ms feedforward shard
    on A100, and the 8-bit balanced square dimension of 896."""
    a100 = preset("dgx-a100").device
    t = matmul_time((8, 8, 8), a100)
    assert t.total == pytest.approx(4.5e-6, rel=0.10)

    t = matmul_time((12288, 6144, 2048), a100)
    assert 1e-3 / 1.5 <= t.total <= 1e-3 * 1.5

    h100 = preset("dgx-h100").device
    dev8 = DeviceSpec(
        name="h100-8bit",
        peak_arithmetic=1e15,
        memory_levels=(
            MemoryLevel("DRAM", 8e10, 3.35e12),
            h100.memory_levels[1],
            h100.memory_levels[2],
            h100.memory_levels[3],
        ),
        word_size=1,
    )
    assert abs(balanced_square_dim(dev8) - 896) <= 16


# ---------------------------------------------------------------------------
# search


TOYS = [
    # (shape args, n_gpu, preset) spanning every parallelism dimension,
    # both tensor axes, experts, awkward primes, and all network presets
    (dict(d_model=1024, d_ff=4096, n_layers=8, batch=4096), 8, "dgx-a100"),
    (dict(d_model=1024, d_ff=4096, n_layers=8, batch=4096), 16, "dgx-h100"),
    (dict(d_model=512, d_ff=2048, n_layers=12, batch=6144), 24, "dgx-h100"),
    (dict(d_model=768, d_ff=3072, n_layers=6, batch=9216), 27, "dgx-a100"),
    (dict(d_model=1024, d_ff=4096, n_layers=16, batch=8192, n_experts=4), 32, "dgx-h100"),
    (dict(d_model=2048, d_ff=8192, n_layers=8, batch=18432), 48, "dgx-h100-superpod"),
    (dict(d_model=1536, d_ff=6144, n_layers=12, batch=12288, n_experts=2), 64, "dgx-h100-superpod"),
    (dict(d_model=4096, d_ff=16384, n_layers=4, batch=32768), 64, "dgx-h100"),
    (dict(d_model=1021, d_ff=4096, n_layers=8, batch=8192), 32, "dgx-h100"),
    (dict(d_model=625, d_ff=4096, n_layers=8, batch=8192), 64, "dgx-h100"),
    (dict(d_model=512, d_ff=2187, n_layers=9, batch=6561), 27, "dgx-a100"),
    (dict(d_model=512, d_ff=2048, n_layers=4, batch=2048), 4, "dgx-a100"),
    (dict(d_model=256, d_ff=1024, n_layers=8, batch=2048, n_experts=2), 16, "dgx-h100"),
    (dict(d_model=768, d_ff=3072, n_layers=12, batch=4096), 12, "dgx1-v100"),
    (dict(d_model=1024, d_ff=4096, n_layers=4, batch=4096), 8, "h100-low-latency"),
    (dict(d_model=2048, d_ff=8192, n_layers=16, batch=8192), 32, "h100-global-nvlink"),
    (dict(d_model=512, d_ff=2048, n_layers=6, batch=13122), 18, "dgx-a100"),
    (dict(d_model=384, d_ff=1536, n_layers=8, batch=4096), 24, "dgx-h100"),
    (dict(d_model=1280, d_ff=5120, n_layers=10, batch=5120), 40, "dgx-h100-superpod"),
    (dict(d_model=896, d_ff=3584, n_layers=14, batch=7168), 56, "h100-global-nvlink-ll"),
    (dict(d_model=640, d_ff=2560, n_layers=20, batch=10240, n_experts=5), 40, "dgx-a100"),
]

POLICIES = [None, OverlapPolicy(dp_overlap_fraction=0.0),
            OverlapPolicy(dp_overlap_fraction=1.0),
            OverlapPolicy(dp_overlap_fraction=0.5)]


def test_search_matches_brute_force_and_is_deterministic():
    """The pruned search returns the exhaustive argmin on 21 toy problems
    up to 64 GPUs, and repeated (including concurrent) evaluation is
    bitwise reproducible."""
    assert len(TOYS) >= 20
    for idx, (shape_args, n_gpu, preset_name) in enumerate(TOYS):
        assert n_gpu <= 64
        shape = make_shape(**shape_args)
        cluster = preset(preset_name)
        policy = POLICIES[idx % len(POLICIES)]
        cfg, bd = best_config(shape, n_gpu, cluster, policy=policy)
        ref_cfg, ref_bd = oracles.brute_force_best(shape, n_gpu, cluster, policy)
        assert cfg == ref_cfg, (idx, preset_name, n_gpu)
        assert bd.t_run == ref_bd.t_run, (idx, preset_name, n_gpu)

    shape = make_shape(**TOYS[4][0])
    cluster = preset(TOYS[4][2])
    runs = [best_config(shape, 32, cluster) for _ in range(10)]
    for cfg, bd in runs[1:]:
        assert cfg == runs[0][0]
        assert bd.t_step == runs[0][1].t_step
        assert bd.t_run == runs[0][1].t_run
        assert bd.mfu == runs[0][1].mfu

    ts = log_points(1e27, 1e28, 2)
    a = sweep(ts, preset("dgx-h100"), mode="dense", workers=4)
    b = sweep(ts, preset("dgx-h100"), mode="dense", workers=4)
    for ra, rb in zip(a, b):
        assert (ra.t_flop, ra.status, ra.n_gpu, ra.config) == \
            (rb.t_flop, rb.status, rb.n_gpu, rb.config)
        assert ra.breakdown.t_step == rb.breakdown.t_step
        assert ra.norm_util == rb.norm_util


# ---------------------------------------------------------------------------
# end-to-end sweeps


def test_end_to_end_sweep_endpoints():
    """Three-month linear-scaling endpoints land within the advertised
    order-of-magnitude windows, and a dense 3e31 FLOP run is infeasible on
    every preset without latency reduction.  Whole scan under 10 minutes."""
    t0 = time.perf_counter()

    recs = sweep(log_points(1e27, 1e29, 4), preset("dgx-h100"), mode="dense")
    ep = find_endpoint(recs)
    assert ep is not None
    assert oom(ep.t_flop, 2e28) <= 1.0, f"H100 endpoint {ep.t_flop:.3e}"

    recs = sweep(log_points(1e27, 1e29, 4), preset("dgx-a100"), mode="dense")
    ep = find_endpoint(recs)
    assert ep is not None
    assert oom(ep.t_flop, 3e28) <= 1.0, f"A100 endpoint {ep.t_flop:.3e}"

    recs = sweep(log_points(1e30, 10**31.5, 2), preset("h100-global-nvlink-ll"),
                 mode="dense")
    ep = find_endpoint(recs)
    assert ep is not None
    assert oom(ep.t_flop, 5e31) <= 1.0, f"global-NVLink+LL endpoint {ep.t_flop:.3e}"

    recs = sweep(log_points(1e32, 10**33.5, 2), preset("h100-global-nvlink"),
                 mode="dense", laws=LAW_PRESETS["deepseek"], cap=2**38)
    ep = find_endpoint(recs)
    assert ep is not None
    assert oom(ep.t_flop, 3e33) <= 1.5, f"DeepSeek-law endpoint {ep.t_flop:.3e}"

    for name in ("dgx1-v100", "dgx-a100", "dgx-h100", "dgx-h100-superpod",
                 "h100-global-nvlink"):
        shape = shape_from_compute(3e31, mode="dense")
        res = min_cluster(shape, preset(name))
        assert res.status != "ok", f"{name} unexpectedly feasible at 3e31"
        assert res.n_gpu is None or res.status != "ok"

    elapsed = time.perf_counter() - t0
    assert elapsed < 600, f"sweep suite took {elapsed:.0f}s"


def test_primary_standalone_no_ui():
    """The whole model runs from a bare interpreter in an empty directory:
    no web server, no frontend, no fastapi import."""
    script = (
        "import sys\n"
        "from trainlim.hwspec import preset\n"
        "from trainlim.scaling import make_shape\n"
        "from trainlim.closedform import closed_form_report\n"
        "from trainlim.search import best_config\n"
        "r = closed_form_report(preset('dgx-h100'))\n"
        "assert r.t_critical_bandwidth_flop > 0\n"
        "cfg, bd = best_config(make_shape(512, 2048, 4, 2048), 8, preset('dgx-a100'))\n"
        "assert bd.t_step > 0\n"
        "assert 'fastapi' not in sys.modules\n"
        "assert 'uvicorn' not in sys.modules\n"
        "print('OK')\n"
    )
    proc = subprocess.run([sys.executable, "-c", script], cwd="/tmp",
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "OK"
