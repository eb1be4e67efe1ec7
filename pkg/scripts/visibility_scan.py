"""Witness value of the weakest pair as a function of state visibility.

Prints the critical visibility for each configuration and, with --steps,
a scan of S_min(v) = 64 + v (S_min - 64) from the closed form together
with the exact simulated S^(1,1)(v).
"""

import argparse
import math

import numpy as np

from seqbell.simulator import ScenarioConfig, critical_visibility, min_closed_form, simulate_S

CONFIGS = {"2x2": (2, 0.5577, 0.2999), "3x3": (3, 0.27665, 0.6219)}


def main():
    ap = argparse.ArgumentParser(description="critical visibility scan")
    ap.add_argument("--steps", type=int, default=11)
    ap.add_argument("--vmin", type=float, default=0.9)
    args = ap.parse_args()

    for name, (n, eps, offset) in CONFIGS.items():
        cfg = ScenarioConfig.symmetric(n, n, eps, math.pi / 4 - offset)
        s_min, pair = min_closed_form(cfg)
        v_crit = critical_visibility(cfg)
        print(f"{name}: S_min = {s_min:.4f} at {pair}, critical visibility = {v_crit:.6f}")
        print(f"  {'v':>6} {'S_min(v)':>10} {'S11 sim':>10}")
        for v in np.linspace(args.vmin, 1.0, args.steps):
            s11 = simulate_S(ScenarioConfig(n, n, cfg.alice, cfg.bob, float(v)), 1, 1).S
            print(f"  {v:6.3f} {64 + v * (s_min - 64):10.4f} {s11:10.4f}")
        print()


if __name__ == "__main__":
    main()
