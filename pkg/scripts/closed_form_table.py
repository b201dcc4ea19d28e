"""Print the closed-form ceiling table for every cluster preset.

Usage: python3 scripts/closed_form_table.py [--alpha A] [--sparsity E]
"""

import argparse

from trainlim.closedform import closed_form_report
from trainlim.hwspec import preset, preset_names


def fmt(x):
    return "unbounded" if x != x or x == float("inf") else f"{x:9.3e}"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.0,
                    help="batch-growth exponent (default 0: fixed batch)")
    ap.add_argument("--sparsity", type=float, default=1.0,
                    help="experts per MLP block")
    args = ap.parse_args()

    header = (f"{'cluster':<26} {'d_prime':>9} {'b_prime':>8} {'sram':>4} "
              f"{'T_bw':>9} {'T_lat':>9} {'T_limit':>9} {'nodes':>9}")
    print(header)
    print("-" * len(header))
    for name in preset_names():
        r = closed_form_report(preset(name), experts=args.sparsity,
                               alpha=args.alpha)
        print(f"{name:<26} {r.d_prime:>9.1f} {r.b_prime:>8.2f} "
              f"{'yes' if r.sram_regime else 'no':>4} "
              f"{fmt(r.t_critical_bandwidth_flop)} "
              f"{fmt(r.t_critical_latency_flop)} {fmt(r.t_limit_flop)} "
              f"{fmt(r.n_critical_nodes)}")


if __name__ == "__main__":
    main()
