"""Where does linear scaling stop?  Sweep the headline scenarios and
report the first compute budget whose best run drops under 80% of
single-device sustained utilization.

Usage: python3 scripts/scaling_endpoints.py [--per-decade N]
Runtime is roughly a minute at the default 4 points per decade.
"""

import argparse
import time

from trainlim.hwspec import preset
from trainlim.scaling import LAW_PRESETS
from trainlim.search import find_endpoint, log_points, sweep

SCENARIOS = [
    # label, preset, scaling laws, T range, extra sweep kwargs
    ("H100 dense", "dgx-h100", "default", 1e27, 1e29, {}),
    ("A100 dense", "dgx-a100", "default", 1e27, 1e29, {}),
    ("global NVLink + low latency", "h100-global-nvlink-ll", "default",
     1e30, 10**31.5, {}),
    ("DeepSeek batch law", "h100-global-nvlink", "deepseek",
     1e32, 10**33.5, {"cap": 2**38}),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--per-decade", type=int, default=4)
    args = ap.parse_args()

    for label, preset_name, laws, t_min, t_max, kw in SCENARIOS:
        cluster = preset(preset_name)
        points = log_points(t_min, t_max, args.per_decade)
        t0 = time.perf_counter()
        records = sweep(points, cluster, mode="dense",
                        laws=LAW_PRESETS[laws], **kw)
        elapsed = time.perf_counter() - t0
        print(f"== {label} ({preset_name}, {laws} laws, {elapsed:.0f}s) ==")
        for r in records:
            norm = "   --" if r.norm_util is None else f"{r.norm_util:.3f}"
            n = "" if r.n_gpu is None else f"n_gpu={r.n_gpu}"
            print(f"  T={r.t_flop:9.3e}  {r.status:<13} norm={norm}  {n}")
        ep = find_endpoint(records)
        if ep is None:
            print("  endpoint: none within range")
        else:
            print(f"  endpoint: T={ep.t_flop:.3e} [{ep.status}]")
        print()


if __name__ == "__main__":
    main()
