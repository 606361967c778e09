"""Deliberately naive reference computations.

Nothing here reuses the integrator or the vectorized right-hand side: the
derivative is re-derived component by component with plain floats, the
stepping is fixed-step classical RK4, and the constant series is summed term
by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonFiniteState
from .model import Closure, ModelParams, ShellState


@dataclass(frozen=True)
class OracleResult:
    times: np.ndarray
    states: np.ndarray
    method: str
    dt: float


def _derivative(a: list[float], lam: float, f0: float, ratio: float) -> list[float]:
    n = len(a)
    out = []
    for j in range(n):
        nxt = a[j + 1] if j + 1 < n else ratio * a[j]
        gain = lam ** (j - 1) * a[j - 1] ** 2 if j > 0 else f0
        out.append(gain - lam**j * a[j] * nxt)
    return out


def _closure_ratio(params: ModelParams) -> float:
    return params.lam ** (-1.0 / 3.0) if params.closure is Closure.FIXED_POINT else 0.0


def rk4_reference(
    initial: ShellState, params: ModelParams, dt: float, sample_times: Sequence[float]
) -> OracleResult:
    """Classical fixed-step RK4; ``dt`` must divide every sample interval."""
    times = np.asarray(sample_times, dtype=float)
    lam, f0, ratio = params.lam, params.f0, _closure_ratio(params)
    a = [float(x) for x in initial.a]
    t = initial.t
    out = []
    for ts in times:
        steps = (ts - t) / dt
        n = int(round(steps))
        if n < 0 or abs(steps - n) > 1e-6 * max(1.0, steps):
            raise ConfigError(f"dt={dt} does not divide the interval to t={ts}", field="dt")
        try:
            for _ in range(n):
                k1 = _derivative(a, lam, f0, ratio)
                k2 = _derivative([x + 0.5 * dt * k for x, k in zip(a, k1)], lam, f0, ratio)
                k3 = _derivative([x + 0.5 * dt * k for x, k in zip(a, k2)], lam, f0, ratio)
                k4 = _derivative([x + dt * k for x, k in zip(a, k3)], lam, f0, ratio)
                a = [x + dt / 6.0 * (p + 2 * q + 2 * r + s) for x, p, q, r, s in zip(a, k1, k2, k3, k4)]
        except OverflowError:
            a = [math.inf]
        if not all(math.isfinite(x) for x in a):
            raise NonFiniteState(f"RK4 reference blew up before t={ts}")
        t = ts
        out.append(list(a))
    return OracleResult(times, np.array(out), "rk4", dt)


def integrating_factor_step(state: ShellState, params: ModelParams, dt: float) -> ShellState:
    """One step of the variation-of-constants form with a_(j+1) frozen over the step.

    a_j <- a_j e^(-r dt) + (f_j + lam^(j-1) a_(j-1)^2) (1 - e^(-r dt)) / r,
    r = lam^j a_(j+1).  Every term is nonnegative for nonnegative input.
    """
    lam, ratio = params.lam, _closure_ratio(params)
    a = [float(x) for x in state.a]
    n = len(a)
    new = []
    for j in range(n):
        nxt = a[j + 1] if j + 1 < n else ratio * a[j]
        source = (params.f0 if j == 0 else 0.0) + (lam ** (j - 1) * a[j - 1] ** 2 if j > 0 else 0.0)
        x = lam**j * nxt * dt
        if x == 0.0:
            new.append(a[j] + dt * source)
        else:
            # (1 - e^-x)/r == dt * (-expm1(-x))/x
            new.append(a[j] * math.exp(-x) + source * dt * (-math.expm1(-x)) / x)
    return ShellState(state.t + dt, new)


def integrating_factor_solve(initial: ShellState, params: ModelParams, dt: float, t_end: float) -> ShellState:
    n = int(round((t_end - initial.t) / dt))
    state = initial
    for _ in range(n):
        state = integrating_factor_step(state, params, dt)
    return state


def series_partial_sums(lam: float, terms: int) -> float:
    """sum_{j < terms} lam^(1/3 - 2j/3) (j + 1), summed directly."""
    if not lam > 1:
        raise ConfigError("lambda must exceed 1", field="lambda")
    total = 0.0
    for j in range(terms):
        total += lam ** (1.0 / 3.0 - 2.0 * j / 3.0) * (j + 1)
    return total
