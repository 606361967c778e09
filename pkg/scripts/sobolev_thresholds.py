"""Steady ||a||_s^2 against N for several s, from long runs and from the fixed point.

Above s = 5/6 the sum grows geometrically in N, at s = 5/6 linearly, below it
converges; the convergence rate near the threshold is slow (ratio 2^{2s-5/3}
per shell), which is what the run-vs-fixed-point columns make visible.

    python3 scripts/sobolev_thresholds.py --shells 10 15 20 --s 0.5 0.7 0.8333333333333334
"""

import argparse

import numpy as np

from dyadic import diagnostics as diag
from dyadic import model
from dyadic.integrator import integrate
from dyadic.model import ModelParams, ShellState


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shells", type=int, nargs="+", default=[10, 15, 20])
    ap.add_argument("--s", type=float, nargs="+", default=[0.5, 0.7, 5 / 6])
    ap.add_argument("--f0", type=float, default=1.0)
    ap.add_argument("--t-end", type=float, default=50.0)
    args = ap.parse_args()

    window = (args.t_end / 2, args.t_end)
    print("N    s        run            fixed point")
    for n in args.shells:
        p = ModelParams(f0=args.f0, n_shells=n)
        times = np.linspace(0.0, args.t_end, 1001)
        traj = integrate(ShellState(0.0, np.zeros(p.size)), p, t_end=args.t_end, sample_times=times)
        for s in args.s:
            run = diag.steady_sobolev_sq(traj, s, window)
            exact = float(model.sobolev_norm(model.fixed_point(p), s) ** 2)
            print(f"{n:<4d} {s:<8.4f} {run:<14.8g} {exact:.8g}")


if __name__ == "__main__":
    main()
