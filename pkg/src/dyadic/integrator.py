"""Adaptive time integration of the truncated dyadic system.

Two embedded pairs share one driver (error control, positivity contract,
dense output, events):

* ``dopri5``: explicit Dormand-Prince 5(4), FSAL.
* ``rodas3``: stiffly accurate L-stable Rosenbrock 3(2) with the exact
  tridiagonal Jacobian.  Needed because the linearized rate of shell j about
  the fixed point grows like lam^((2j-1)/3), i.e. ~1e9 at N = 20.

``method="auto"`` picks ``dopri5`` when a Gershgorin bound on the Jacobian
spectrum times the integration span is small enough for explicit stepping.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import model
from .errors import (
    ConfigError,
    MaxStepsExceeded,
    NonFiniteState,
    ShapeMismatch,
    StepSizeUnderflow,
)
from .model import ModelParams, ShellState

# explicit stepping is chosen below this many stiff time constants per span
_EXPLICIT_BUDGET = 2.0e4
_FACTOR_MIN = 0.2
_FACTOR_MAX = 5.0


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_init: Optional[float] = None
    dt_min: float = 1e-20
    dt_max: float = math.inf
    safety: float = 0.9
    max_steps: int = 2_000_000
    method: str = "auto"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("rtol and atol must be positive", field="rtol" if not self.rtol > 0 else "atol")
        if not 0 < self.dt_min <= self.dt_max:
            raise ConfigError("need 0 < dt_min <= dt_max", field="dt_min")
        if self.dt_init is not None and not self.dt_init > 0:
            raise ConfigError("dt_init must be positive", field="dt_init")
        if not 0 < self.safety < 1:
            raise ConfigError("safety must lie in (0, 1)", field="safety")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive", field="max_steps")
        if self.method not in ("auto", *_STEPPERS):
            raise ConfigError(f"unknown method {self.method!r}", field="method")


# --- steppers ------------------------------------------------------------


class _DormandPrince:
    name = "dopri5"
    order = 5
    lands_on_samples = False
    error_exponent = 1.0 / 5.0

    c = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
    A = (
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    )
    # 5th-order weights minus embedded 4th-order weights
    E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

    def __init__(self, params: ModelParams):
        self.params = params

    def derivative(self, y):
        return model.rhs_array(y, self.params)

    def attempt(self, y, fy, dt):
        f = lambda x: model.rhs_array(x, self.params)
        k = [fy]
        for i in range(1, 7):
            yi = y.copy()
            for aij, kj in zip(self.A[i], k):
                if aij:
                    yi += dt * aij * kj
            k.append(f(yi))
        # row 6 of A holds the 5th-order weights, so yi is the new state (FSAL)
        err = dt * np.tensordot(self.E, np.array(k), axes=1)
        return yi, err, k[6]


class _Rodas3:
    """Rosenbrock pair in the form (I/(h gamma) - J) K_i = f(Y_i) + sum_j C_ij K_j / h."""

    name = "rodas3"
    order = 3
    # Hermite output would multiply state round-off by the ~1e9 Jacobian through h*f
    lands_on_samples = True
    error_exponent = 1.0 / 3.0
    gamma = 0.5

    def __init__(self, params: ModelParams):
        self.params = params
        self._eye = np.eye(params.size)

    def derivative(self, y):
        return model.rhs_array(y, self.params)

    def attempt(self, y, fy, dt):
        p = self.params
        f = lambda x: model.rhs_array(x, p)
        lu = lu_factor(self._eye / (dt * self.gamma) - model.jacobian(y, p), check_finite=False)
        k1 = lu_solve(lu, fy)
        k2 = lu_solve(lu, fy + (4.0 / dt) * k1)
        k3 = lu_solve(lu, f(y + 2.0 * k1) + (k1 - k2) / dt)
        y4 = y + 2.0 * k1 + k3
        k4 = lu_solve(lu, f(y4) + (k1 - k2 - (8.0 / 3.0) * k3) / dt)
        y_new = y4 + k4
        return y_new, k4, f(y_new)


_STEPPERS = {"dopri5": _DormandPrince, "rodas3": _Rodas3}


def stiffness_bound(a: np.ndarray, params: ModelParams) -> float:
    """Gershgorin bound on the Jacobian spectral radius at ``a``."""
    return float(np.max(np.sum(np.abs(model.jacobian(a, params)), axis=1)))


def select_method(control: StepControl, params: ModelParams, a0: np.ndarray, span: float) -> str:
    if control.method != "auto":
        return control.method
    rho = max(stiffness_bound(a0, params), stiffness_bound(model.fixed_point(params).a, params))
    return "dopri5" if rho * span <= _EXPLICIT_BUDGET else "rodas3"


# --- step control --------------------------------------------------------


def error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, control: StepControl) -> float:
    """Max over shells of |err_j| / (atol + rtol * max(|y_j|, |y_new_j|))."""
    scale = control.atol + control.rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def enforce_positivity(candidate: np.ndarray, control: StepControl) -> tuple[bool, np.ndarray]:
    """Accept/reject a trial state under the positivity contract.

    Components below -atol reject the step; those in [-atol, 0) are clamped to 0.
    """
    candidate = np.asarray(candidate, dtype=float)
    if np.any(candidate < -control.atol):
        return False, candidate
    if np.any(candidate < 0.0):
        return True, np.maximum(candidate, 0.0)
    return True, candidate


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "dt_min": self.dt_min if self.accepted else None,
            "dt_max": self.dt_max if self.accepted else None,
        }


@dataclass(frozen=True)
class StepResult:
    state: ShellState
    dt_used: float
    dt_next: float
    error_estimate: float


def _advance(stepper, y, fy, dt, control: StepControl, stats: StepStats, final: bool = False):
    """Retry from (y, fy) until a step passes the error and positivity tests."""
    while True:
        if dt < control.dt_min and not final:
            raise StepSizeUnderflow(f"step size {dt:.3e} fell below dt_min={control.dt_min:.3e}")
        y_new, err_vec, f_new = stepper.attempt(y, fy, dt)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err_vec))):
            stats.rejected += 1
            if dt * 0.25 < control.dt_min:
                raise NonFiniteState("non-finite state; parameters may exceed the representable range")
            dt *= 0.25
            final = False
            continue
        err = error_norm(err_vec, y, y_new, control)
        if err > 1.0:
            stats.rejected += 1
            dt *= max(_FACTOR_MIN, control.safety * err ** (-stepper.error_exponent))
            final = False
            continue
        ok, clamped = enforce_positivity(y_new, control)
        if not ok:
            stats.rejected += 1
            dt *= 0.5
            final = False
            continue
        if clamped is not y_new:
            y_new, f_new = clamped, stepper.derivative(clamped)
        factor = _FACTOR_MAX if err == 0.0 else min(
            _FACTOR_MAX, control.safety * err ** (-stepper.error_exponent)
        )
        stats.accepted += 1
        stats.dt_min = min(stats.dt_min, dt)
        stats.dt_max = max(stats.dt_max, dt)
        return y_new, f_new, dt, factor * dt, err


def step(state: ShellState, params: ModelParams, control: StepControl, dt_try: float) -> StepResult:
    """One accepted embedded step; rejected attempts are retried at smaller dt."""
    y = np.array(state.a, dtype=float)
    if y.size != params.size:
        raise ShapeMismatch(f"expected {params.size} shells, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state is not finite")
    stepper = _STEPPERS[select_method(control, params, y, dt_try)](params)
    fy = model.rhs_array(y, params)
    y_new, f_new, dt_used, dt_next, err = _advance(stepper, y, fy, dt_try, control, StepStats())
    dt_next = min(max(dt_next, control.dt_min), control.dt_max)
    return StepResult(ShellState(state.t + dt_used, y_new), dt_used, dt_next, err)


def initial_step(y0, f0, params: ModelParams, control: StepControl, order: int, span: float) -> float:
    """Starting step size from the usual two-probe heuristic."""
    scale = control.atol + control.rtol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = model.rhs_array(y0 + h0 * f0, params)
    d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, span)


# --- dense output ---------------------------------------------------------


def hermite(t0, y0, f0, t1, y1, f1, t):
    """Cubic Hermite interpolant on [t0, t1] evaluated at scalar or array ``t``."""
    h = t1 - t0
    theta = (np.asarray(t, dtype=float) - t0) / h
    th = theta[..., None] if theta.ndim else theta
    return (
        (1 - th) * y0
        + th * y1
        + th * (th - 1) * ((1 - 2 * th) * (y1 - y0) + (th - 1) * h * f0 + th * h * f1)
    )


# --- events ----------------------------------------------------------------


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class SobolevNorm:
    s: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ConfigError("Sobolev index must be finite", field="s")

    def __call__(self, a):
        return model.sobolev_norm(a, self.s)


@dataclass(frozen=True)
class ShellValue:
    j: int

    def __call__(self, a):
        a = np.asarray(a)
        if not 0 <= self.j < a.shape[-1]:
            raise IndexError(f"shell {self.j} out of range")
        return a[..., self.j]


@dataclass(frozen=True)
class EnergyNorm:
    def __call__(self, a):
        return model.energy_norm(a)


@dataclass(frozen=True)
class EventSpec:
    functional: Callable[[np.ndarray], float]
    threshold: float
    direction: Direction = Direction.UP

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))

    def crossed(self, value) -> bool:
        if self.direction is Direction.UP:
            return value >= self.threshold
        return value <= self.threshold


@dataclass(frozen=True)
class EventHit:
    spec: EventSpec
    state: ShellState

    @property
    def t(self) -> float:
        return self.state.t


def _bisect(spec: EventSpec, t0, y0, f0, t1, y1, f1, tol):
    lo, hi = t0, t1
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if spec.crossed(spec.functional(hermite(t0, y0, f0, t1, y1, f1, mid))):
            hi = mid
        else:
            lo = mid
    return hi, np.maximum(hermite(t0, y0, f0, t1, y1, f1, hi), 0.0)


# --- trajectory ------------------------------------------------------------


def _readonly(x):
    x = np.ascontiguousarray(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class Trajectory:
    """Samples on a strictly increasing time grid plus cached scalars.

    ``amps`` has shape (samples, N+1).  The cached columns are |a|^2, (f, a)
    and the closure dissipation D.
    """

    params: ModelParams
    times: np.ndarray
    amps: np.ndarray
    stats: StepStats = field(default_factory=StepStats)
    method: str = ""
    events: tuple = ()
    energy_sq: np.ndarray = field(init=False, repr=False)
    forcing_power: np.ndarray = field(init=False, repr=False)
    dissipation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times, amps = _readonly(self.times), _readonly(self.amps)
        if amps.ndim != 2 or amps.shape[0] != times.size or amps.shape[1] != self.params.size:
            raise ShapeMismatch(f"amplitudes {amps.shape} do not match {times.size} samples of {self.params.size} shells")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "energy_sq", _readonly(np.sum(amps * amps, axis=1)))
        object.__setattr__(self, "forcing_power", _readonly(model.forcing_power(amps, self.params)))
        object.__setattr__(self, "dissipation", _readonly(model.dissipation_rate(amps, self.params)))

    def __len__(self):
        return self.times.size

    def state(self, i: int) -> ShellState:
        return ShellState(self.times[i], self.amps[i])

    @property
    def samples(self) -> list[ShellState]:
        return [self.state(i) for i in range(len(self))]

    def window(self, t1: float, t2: float) -> np.ndarray:
        """Boolean mask of samples with t1 <= t <= t2 (with round-off slack)."""
        slack = 1e-12 * max(1.0, abs(t2))
        return (self.times >= t1 - slack) & (self.times <= t2 + slack)

    def index_of(self, t: float) -> int | None:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) <= 1e-9 * max(1.0, abs(t)):
            return i
        return None


def detect_event(traj: Trajectory, spec: EventSpec, tol: float = 1e-8) -> Optional[tuple[float, ShellState]]:
    """First crossing of ``spec`` along a sampled trajectory.

    Between samples the state is reconstructed with the cubic Hermite
    interpolant built from the model derivative at both ends, and the
    crossing is bisected to relative time tolerance ``tol``.
    """
    values = np.asarray(spec.functional(traj.amps), dtype=float)
    hits = np.flatnonzero([spec.crossed(v) for v in values])
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return traj.times[0], traj.state(0)
    p = traj.params
    y0, y1 = traj.amps[i - 1], traj.amps[i]
    t, y = _bisect(
        spec,
        traj.times[i - 1], y0, model.rhs_array(y0, p),
        traj.times[i], y1, model.rhs_array(y1, p),
        tol,
    )
    return t, ShellState(t, y)


def integrate(
    initial: ShellState,
    params: ModelParams,
    control: StepControl | None = None,
    t_end: float | None = None,
    sample_times: Sequence[float] | None = None,
    events: Iterable[EventSpec] = (),
) -> Trajectory:
    """Integrate from ``initial`` to ``t_end``, sampling at ``sample_times``.

    The explicit pair fills samples inside a step from the cubic Hermite
    interpolant (clipped at zero); the stiff pair shortens steps to land on
    every sample time.  ``t_end`` itself is always landed on exactly.  Event
    crossings are located per step and returned in ``Trajectory.events``.
    """
    control = control or StepControl()
    if t_end is None:
        raise ConfigError("t_end is required", field="t_end")
    y = np.array(initial.a, dtype=float)
    if y.size != params.size:
        raise ShapeMismatch(f"expected {params.size} shells, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state is not finite")
    if np.any(y < 0):
        raise ConfigError("initial amplitudes must be nonnegative", field="initial")
    t0 = initial.t
    if not t_end > t0:
        raise ConfigError("t_end must exceed the initial time", field="t_end")
    samples = np.array([t0, t_end] if sample_times is None else sample_times, dtype=float)
    if samples.size == 0 or np.any(np.diff(samples) <= 0):
        raise ConfigError("sample_times must be strictly increasing and nonempty", field="sample_times")
    if samples[0] < t0 or samples[-1] > t_end:
        raise ConfigError("sample_times must lie inside [t0, t_end]", field="sample_times")

    span = t_end - t0
    name = select_method(control, params, y, span)
    stepper = _STEPPERS[name](params)
    stats = StepStats()
    events = list(events)
    found: dict[int, EventHit] = {}

    out = np.empty((samples.size, params.size))
    nxt = 0
    while nxt < samples.size and samples[nxt] <= t0:
        out[nxt] = y
        nxt += 1
    for n, spec in enumerate(events):
        if spec.crossed(spec.functional(y)):
            found[n] = EventHit(spec, ShellState(t0, y))

    fy = model.rhs_array(y, params)
    dt = control.dt_init or initial_step(y, fy, params, control, stepper.order, span)
    dt = min(max(dt, control.dt_min), control.dt_max)
    t = t0
    while t < t_end:
        if stats.accepted >= control.max_steps:
            raise MaxStepsExceeded(f"reached max_steps={control.max_steps} at t={t:.6g}")
        target = t_end
        if stepper.lands_on_samples and nxt < samples.size:
            target = samples[nxt]
        final = t + 1.01 * dt >= target
        h = target - t if final else dt
        y_new, f_new, h_used, dt_next, _ = _advance(stepper, y, fy, h, control, stats, final=final)
        t_new = target if h_used == h and final else t + h_used
        while nxt < samples.size and samples[nxt] <= t_new:
            ts = samples[nxt]
            if ts == t_new:
                out[nxt] = y_new
            else:
                out[nxt] = np.maximum(hermite(t, y, fy, t_new, y_new, f_new, ts), 0.0)
            nxt += 1
        for n, spec in enumerate(events):
            if n not in found and spec.crossed(spec.functional(y_new)):
                te, ye = _bisect(spec, t, y, fy, t_new, y_new, f_new, control.rtol)
                found[n] = EventHit(spec, ShellState(te, ye))
        t, y, fy = t_new, y_new, f_new
        if final and h_used == h:
            # a clipped landing step says little about the admissible step size
            dt_next = max(dt_next, dt)
        dt = min(max(dt_next, control.dt_min), control.dt_max)

    hits = tuple(found[n] for n in sorted(found))
    return Trajectory(params, samples, out, stats=stats, method=name, events=hits)
