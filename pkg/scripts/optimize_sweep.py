"""Optimize (epsilon, theta) for square and rectangular observer counts.

    python scripts/optimize_sweep.py --max-n 4 --asymmetric
"""

import argparse
import csv
import math
import sys

from seqbell.errors import NoFeasiblePoint
from seqbell.optimizer import optimize_symmetric
from seqbell.witness import LHV_BOUND


def main():
    ap = argparse.ArgumentParser(description="optimizer sweep over (J, K)")
    ap.add_argument("--max-n", type=int, default=4)
    ap.add_argument("--budget", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--asymmetric", action="store_true", help="also refine with independent side parameters")
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["J", "K", "mode", "epsilon", "theta_offset", "epsilon2", "theta2_offset", "min_S", "j", "k",
                "violates"])
    for J in range(1, args.max_n + 1):
        for K in range(J, args.max_n + 1):
            modes = [False, True] if args.asymmetric and J != K else [False]
            for asym in modes:
                try:
                    r = optimize_symmetric(J, K, budget=args.budget, seed=args.seed, asymmetric=asym)
                except NoFeasiblePoint:
                    w.writerow([J, K, "asym" if asym else "sym"] + [""] * 7 + [False])
                    continue
                w.writerow([J, K, "asym" if asym else "sym", f"{r.epsilon:.6f}", f"{math.pi / 4 - r.theta:.6f}",
                            "" if r.epsilon2 is None else f"{r.epsilon2:.6f}",
                            "" if r.theta2 is None else f"{math.pi / 4 - r.theta2:.6f}",
                            f"{r.min_S:.6f}", *r.argmin_pair, r.min_S > LHV_BOUND])


if __name__ == "__main__":
    main()
