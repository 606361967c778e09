"""Time for ||a||_{5/6} to reach a threshold, started from rest, as the truncation grows.

Writes a CSV with one row per N for two thresholds: a fixed one and one that
scales with the steady value sqrt(N+1).

    python3 scripts/fill_time_vs_shells.py --out fill_times.csv
"""

import argparse
import csv
import math

import numpy as np

from dyadic.integrator import EventSpec, SobolevNorm, integrate
from dyadic.model import ModelParams, ShellState


def fill_time(n: int, threshold: float, f0: float, t_end: float) -> float:
    p = ModelParams(f0=f0, n_shells=n)
    traj = integrate(ShellState(0.0, np.zeros(p.size)), p, t_end=t_end,
                     events=[EventSpec(SobolevNorm(5 / 6), threshold)])
    return traj.events[0].t if traj.events else math.inf


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shells", type=int, nargs="+", default=[6, 8, 10, 12, 14, 16, 18, 20])
    ap.add_argument("--f0", type=float, default=2 ** (-5 / 6))
    ap.add_argument("--fraction", type=float, default=0.9)
    ap.add_argument("--t-end", type=float, default=50.0)
    ap.add_argument("--out", default="fill_times.csv")
    args = ap.parse_args()

    fixed = args.fraction * math.sqrt(min(args.shells) + 1)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_shells", "t_fixed_threshold", "t_scaled_threshold"])
        for n in args.shells:
            scaled = args.fraction * math.sqrt(n + 1)
            row = [n, fill_time(n, fixed, args.f0, args.t_end), fill_time(n, scaled, args.f0, args.t_end)]
            w.writerow([row[0], "%.17g" % row[1], "%.17g" % row[2]])
            print(f"N={n:3d}  fixed={row[1]:.6f}  scaled={row[2]:.6f}")


if __name__ == "__main__":
    main()
