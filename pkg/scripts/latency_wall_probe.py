"""Probe where each preset stops being able to finish a three-month run:
walk the compute budget upward and report the first infeasible point.

Usage: python3 scripts/latency_wall_probe.py [--t-start 1e28] [--decades 4]
"""

import argparse

from trainlim.hwspec import preset, preset_names
from trainlim.scaling import shape_from_compute
from trainlim.search import log_points, min_cluster


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-start", type=float, default=1e28)
    ap.add_argument("--decades", type=float, default=4.0)
    ap.add_argument("--per-decade", type=int, default=1)
    args = ap.parse_args()

    points = log_points(args.t_start, args.t_start * 10**args.decades,
                        args.per_decade)
    for name in preset_names():
        cluster = preset(name)
        print(f"== {name} ==")
        for t in points:
            shape = shape_from_compute(t, mode="dense")
            res = min_cluster(shape, cluster)
            detail = f"n_gpu={res.n_gpu}" if res.feasible else res.message
            print(f"  T={t:9.3e}  {res.status:<13} {detail}")
            if not res.feasible:
                break
        print()


if __name__ == "__main__":
    main()
