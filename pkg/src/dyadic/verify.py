"""Acceptance suite: each criterion as a function returning a :class:`Criterion`.

Runs shared by several criteria are cached per process.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import diagnostics as diag
from . import oracle
from .integrator import StepControl, Trajectory, integrate
from .model import Closure, ModelParams, ShellState

F0_NORMALIZED = 2.0 ** (-5.0 / 6.0)


@dataclass
class Criterion:
    number: int
    name: str
    anchor: str
    passed: bool
    measured: Any
    tolerance: Any
    seconds: float = 0.0
    parts: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] C{self.number:02d} {self.name:<28} {self.anchor}  measured={_fmt(self.measured)} tol={_fmt(self.tolerance)}"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return str(x)


def _zero(params: ModelParams) -> ShellState:
    return ShellState(0.0, np.zeros(params.size))


# --- shared runs --------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def attraction_run() -> Trajectory:
    """f0 = lam^(-1/3), N = 18, zero start, T = 30 sampled every 0.01."""
    p = ModelParams(f0=F0_NORMALIZED, n_shells=18)
    return integrate(_zero(p), p, t_end=30.0, sample_times=np.linspace(0.0, 30.0, 3001))


@functools.lru_cache(maxsize=None)
def spectrum_run() -> Trajectory:
    """f0 = 1, N = 20, zero start, T = 200; dense on the averaging window [100, 200]."""
    p = ModelParams(f0=1.0, n_shells=20)
    times = np.concatenate([np.linspace(0.0, 99.0, 100), np.linspace(100.0, 200.0, 2001)])
    return integrate(_zero(p), p, t_end=200.0, sample_times=times)


@functools.lru_cache(maxsize=None)
def steady_run(n_shells: int) -> Trajectory:
    p = ModelParams(f0=1.0, n_shells=n_shells)
    times = np.concatenate([np.linspace(0.0, 24.0, 25), np.linspace(25.0, 50.0, 501)])
    return integrate(_zero(p), p, t_end=50.0, sample_times=times)


def random_initial_state(n_shells: int, seed: int) -> np.ndarray:
    """Nonnegative random data: even seeds perturb the fixed-point profile, odd seeds are O(1) uniform."""
    rng = np.random.default_rng(seed)
    if seed % 2 == 0:
        return rng.uniform(0.0, 2.0, n_shells + 1) * np.exp2(-2.5 * np.arange(n_shells + 1) / 3.0)
    return rng.uniform(0.0, 1.0, n_shells + 1)


# --- criteria -------------------------------------------------------------------


def c01_fixed_point() -> Criterion:
    tol = 1e-10
    worst = {}
    for f0 in (F0_NORMALIZED, 1.0):
        for n in (10, 20):
            worst[f"f0={f0:.4g},N={n}"] = diag.fixed_point_residual(ModelParams(f0=f0, n_shells=n))
    m = max(worst.values())
    return Criterion(1, "fixed-point residual", "There exists a unique fixed point", m <= tol, m, tol, parts=worst)


def c02_oracle_equivalence() -> Criterion:
    tol = 1e-7
    p = ModelParams(f0=1.0, n_shells=4)
    times = [0.5, 1.0, 1.5, 2.0]
    # shells of size 1e-12 appear early, so atol must sit well below them
    control = StepControl(rtol=1e-12, atol=1e-16)
    traj = integrate(_zero(p), p, control, t_end=2.0, sample_times=[0.0, *times])
    ref = oracle.rk4_reference(_zero(p), p, 1e-5, times)
    rel = np.abs(traj.amps[1:] - ref.states) / np.abs(ref.states)
    m = float(rel.max())
    return Criterion(2, "oracle equivalence", "adaptive vs RK4(dt=1e-5), N=4, T=2", m <= tol, m, tol,
                     parts={"method": traj.method, "steps": traj.stats.accepted})


def c03_galerkin_energy() -> Criterion:
    tol = 1e-6
    p = ModelParams(f0=1.0, n_shells=12, closure=Closure.PURE_GALERKIN)
    traj = integrate(_zero(p), p, t_end=10.0, sample_times=np.linspace(0.0, 10.0, 2001))
    bal = diag.energy_balance_residual(traj)
    ok = bal["relative"] <= tol and bal["grid_guard"] < 0.1 * tol
    return Criterion(3, "Galerkin energy identity", "|a(t)|^2 - |a(0)|^2 = 2 int f0 a0 (zero boundary term)",
                     ok, bal["relative"], tol, parts=bal)


def c04_positivity(count: int = 20) -> Criterion:
    p = ModelParams(f0=1.0, n_shells=15)
    mins = []
    for seed in range(count):
        traj = integrate(ShellState(0.0, random_initial_state(15, seed)), p, t_end=10.0,
                         sample_times=np.linspace(0.0, 10.0, 201))
        mins.append(float(traj.amps.min()))
    m = min(mins)
    return Criterion(4, "positivity", "positivity: a_j(t) > 0 for all t > 0", m >= 0.0, m, 0.0,
                     parts={"runs": count})


def c05_constants() -> Criterion:
    tol = 1e-9
    p = ModelParams()
    c = diag.constants(p)
    alpha_exact = 2.0 - 2.0 ** (15.0 / 16.0)
    brute = oracle.series_partial_sums(p.lam, 10_000)
    d_alpha = abs(c.alpha - alpha_exact)
    d_series = abs(c.series - brute)
    d_beta = abs(c.beta_normalized - alpha_exact / brute)
    m = max(d_alpha, d_series, d_beta)
    return Criterion(5, "stability constants", "alpha = 2 - lam^(3/8), beta = alpha / series", m <= tol, m, tol,
                     parts={"alpha": c.alpha, "beta_normalized": c.beta_normalized, "series": c.series})


def c06_exponential_attraction() -> Criterion:
    traj = attraction_run()
    fit = diag.decay_fit(traj, (2.0, 30.0), tol=1e-2)
    ok = fit.bound_holds and fit.rate >= fit.beta
    return Criterion(6, "exponential attraction", "exponential attraction: |b(t)|^2 <= |b(0)|^2 e^{-beta t}", ok,
                     {"rate": fit.rate, "r2": fit.r2, "worst_bound_ratio": fit.worst_bound_ratio},
                     {"bound_factor": 1.01, "min_rate": fit.beta}, parts={"fit_window": fit.fit_window})


def c07_lyapunov() -> Criterion:
    rec = diag.lyapunov_all_pairs(attraction_run(), tol=1e-3)
    return Criterion(7, "Lyapunov decrease", "Lyapunov decrease over all sampled pairs", bool(rec.passed),
                     rec.measured["worst_excess"], rec.tolerance, parts=rec.measured)


def c08_partial_energy(points: int = 50) -> Criterion:
    traj = attraction_run()
    step = float(traj.times[1] - traj.times[0])
    times = diag.stencil_times(traj, points, fd_steps=2)
    failures = []
    worst_margin = math.inf
    for k in range(traj.params.n_shells):
        for t in times:
            rec = diag.check_partial_energy(traj, k, t, 2 * step)
            margin = rec.measured["slack"] + rec.tolerance
            worst_margin = min(worst_margin, margin)
            if not rec.passed:
                failures.append((k, t))
    return Criterion(8, "partial energy inequality", "d/dt sum b_j^2 <= -sum d_j^2 + d_{k+1}^2",
                     not failures, {"checked": len(times) * traj.params.n_shells, "failures": len(failures),
                                    "worst_margin": worst_margin}, "slack >= -tol_fd",
                     parts={"times": len(times)})


def c09_spectrum() -> Criterion:
    traj = spectrum_run()
    fit = diag.spectrum_fit(traj, (100.0, 200.0), (3, 15))
    expected_prefactor = 2.0 ** (5.0 / 6.0) * traj.params.f0
    d_slope = abs(fit.slope + 5.0 / 3.0)
    d_pref = abs(fit.prefactor / expected_prefactor - 1.0)
    ok = d_slope <= 0.02 and d_pref <= 0.02
    return Criterion(9, "Kolmogorov spectrum", "E(|k|) = 2^{5/6} f_0 |k|^{-5/3}", ok,
                     {"slope": fit.slope, "prefactor": fit.prefactor}, {"slope": 0.02, "prefactor_rel": 0.02})


def c10_dissipation() -> Criterion:
    traj = spectrum_run()
    md = diag.mean_dissipation(traj, (100.0, 200.0))
    expected = 2.0 ** (5.0 / 12.0) * traj.params.f0**1.5
    rel = abs(md / expected - 1.0)
    return Criterion(10, "mean dissipation", "eps_bar = 2^{5/12} f_0^{3/2}", rel <= 0.01,
                     {"mean": md, "expected": expected, "relative": rel}, 0.01)


def c11_blowup_proxy() -> Criterion:
    window = (25.0, 50.0)
    h56, h07 = {}, {}
    for n in (10, 15, 20):
        traj = steady_run(n)
        h56[n] = diag.steady_sobolev_sq(traj, 5.0 / 6.0, window)
        h07[n] = diag.steady_sobolev_sq(traj, 0.7, window)
    f0 = 1.0
    rel56 = {n: abs(v / ((n + 1) * 2.0 ** (5.0 / 6.0) * f0) - 1.0) for n, v in h56.items()}
    linear = all(rel <= 0.01 for rel in rel56.values())
    growth = (h56[20] - h56[15]) >= 0.99 * (h56[15] - h56[10]) > 0
    change07 = abs(h07[20] / h07[15] - 1.0)
    parts = {
        "h56_linear_in_N": linear,
        "h56_no_saturation": bool(growth),
        "h07_converged": bool(change07 <= 0.01),
    }
    return Criterion(11, "blow-up proxy", "H^{5/6} grows linearly in N, H^{0.7} converges", all(parts.values()),
                     {"h56_rel_err": max(rel56.values()), "h07_change_15_20": change07},
                     {"h56": 0.01, "h07": 0.01}, parts=parts)


def c12_integrating_factor(states: int = 1000) -> Criterion:
    p = ModelParams(f0=1.0, n_shells=4)
    ref = oracle.rk4_reference(_zero(p), p, 1e-5, [1.0]).states[-1]
    dts = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
    errs = [float(np.max(np.abs(oracle.integrating_factor_solve(_zero(p), p, dt, 1.0).a - ref))) for dt in dts]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    order_ok = all(0.9 <= o <= 1.1 for o in orders)
    rng = np.random.default_rng(12)
    pn = ModelParams(f0=1.0, n_shells=15)
    worst = math.inf
    for _ in range(states):
        a = rng.uniform(0.0, 1.0, pn.size) * rng.choice([0.0, 1.0], pn.size, p=[0.2, 0.8])
        dt = 10.0 ** rng.uniform(-6, 0)
        worst = min(worst, float(oracle.integrating_factor_step(ShellState(0.0, a), pn, dt).a.min()))
    ok = order_ok and worst >= 0.0
    return Criterion(12, "integrating-factor oracle", "variation-of-constants form, first order, positive", ok,
                     {"orders": orders, "min_output": worst}, {"order": [0.9, 1.1], "min_output": 0.0},
                     parts={"errors": errs})


FAST: tuple[Callable[[], Criterion], ...] = (
    c01_fixed_point,
    c02_oracle_equivalence,
    c03_galerkin_energy,
    c05_constants,
    c06_exponential_attraction,
    c07_lyapunov,
    c08_partial_energy,
    c12_integrating_factor,
)
FULL: tuple[Callable[[], Criterion], ...] = (
    c01_fixed_point,
    c02_oracle_equivalence,
    c03_galerkin_energy,
    c04_positivity,
    c05_constants,
    c06_exponential_attraction,
    c07_lyapunov,
    c08_partial_energy,
    c09_spectrum,
    c10_dissipation,
    c11_blowup_proxy,
    c12_integrating_factor,
)


def run(tier: str = "fast", echo: Callable[[str], None] | None = print) -> list[Criterion]:
    suite = {"fast": FAST, "full": FULL}[tier]
    results = []
    for fn in suite:
        start = time.perf_counter()
        res = fn()
        res.seconds = time.perf_counter() - start
        results.append(res)
        if echo:
            echo(res.line())
    return results


def cmd_verify(tier: str = "fast", quiet: bool = False) -> int:
    """Print one line per criterion; exit 0 iff every criterion passes."""
    results = run(tier, echo=None if quiet else print)
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(f"C{r.number:02d} ({r.name})" for r in failed)
        print(f"{len(failed)} of {len(results)} criteria failed: {names}")
        return 1
    if not quiet:
        print(f"all {len(results)} criteria passed ({tier} tier)")
    return 0
