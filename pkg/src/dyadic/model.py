"""Forced inviscid dyadic model, truncated to shells 0..N.

    da_0/dt = -a_0 a_1 + f_0
    da_j/dt = lam^(j-1) a_(j-1)^2 - lam^j a_j a_(j+1)          1 <= j <= N

with a_(N+1) supplied by the closure rule.  lam is stored through its
base-2 exponent ``g`` (lam = 2**g) so every power of lam is evaluated as a
single ``exp2`` call.

Most functions accept either a :class:`ShellState` or a bare array of
amplitudes; array inputs may carry leading batch axes (shells last), which is
how the diagnostics evaluate whole trajectories at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ConfigError, ShapeMismatch

DEFAULT_G = 2.5
MAX_SHELLS = 48  # lam^(N-1) and lam^(j^2) stay representable well past this


class Closure(str, enum.Enum):
    PURE_GALERKIN = "pure_galerkin"
    FIXED_POINT = "fixed_point"


@dataclass(frozen=True)
class ModelParams:
    """Scaling exponent, forcing, truncation and closure of a run."""

    f0: float = 1.0
    n_shells: int = 20
    g: float = DEFAULT_G
    closure: Closure = Closure.FIXED_POINT

    def __post_init__(self):
        try:
            object.__setattr__(self, "closure", Closure(self.closure))
        except ValueError:
            raise ConfigError(f"unknown closure {self.closure!r}", field="closure") from None
        if not (isinstance(self.n_shells, (int, np.integer)) and not isinstance(self.n_shells, bool)):
            raise ConfigError("n_shells must be an integer", field="n_shells")
        object.__setattr__(self, "n_shells", int(self.n_shells))
        for name in ("f0", "g"):
            try:
                object.__setattr__(self, name, float(getattr(self, name)))
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be a number, got {getattr(self, name)!r}", field=name) from None
        if not (math.isfinite(self.f0) and self.f0 > 0):
            raise ConfigError(f"f0 must be positive, got {self.f0}", field="f0")
        if not (math.isfinite(self.g) and self.g > 0):
            raise ConfigError(f"g must be positive (lambda = 2**g > 1), got {self.g}", field="g")
        if not 1 <= self.n_shells <= MAX_SHELLS:
            raise ConfigError(
                f"n_shells must lie in [1, {MAX_SHELLS}], got {self.n_shells}", field="n_shells"
            )

    @classmethod
    def from_lambda(cls, lam: float, **kwargs) -> "ModelParams":
        if not lam > 1:
            raise ConfigError(f"lambda must exceed 1, got {lam}", field="lambda")
        return cls(g=math.log2(lam), **kwargs)

    @property
    def lam(self) -> float:
        return 2.0**self.g

    def lam_pow(self, x):
        """lam**x computed as 2**(g*x); ``x`` may be an array."""
        return np.exp2(self.g * np.asarray(x, dtype=float))

    @property
    def size(self) -> int:
        return self.n_shells + 1

    @cached_property
    def shells(self) -> np.ndarray:
        j = np.arange(self.size, dtype=float)
        j.setflags(write=False)
        return j

    @property
    def frame_constant(self) -> float:
        """c with a(t) = c * a_norm(c t) mapping onto the f0 = lam^(-1/3) frame."""
        return math.sqrt(self.f0) * 2.0 ** (self.g / 6.0)

    @property
    def closure_ratio(self) -> float:
        """a_(N+1) / a_N imposed by the closure."""
        if self.closure is Closure.FIXED_POINT:
            return 2.0 ** (-self.g / 3.0)
        return 0.0

    @cached_property
    def forcing(self) -> np.ndarray:
        f = np.zeros(self.size)
        f[0] = self.f0
        f.setflags(write=False)
        return f

    @cached_property
    def _coef_out(self) -> np.ndarray:
        # lam^j, with the closure folded into the last entry
        c = self.lam_pow(self.shells)
        c[-1] *= self.closure_ratio
        c.setflags(write=False)
        return c

    @cached_property
    def _coef_in(self) -> np.ndarray:
        # lam^(j-1) for j >= 1
        c = self.lam_pow(self.shells[1:] - 1.0)
        c.setflags(write=False)
        return c


@dataclass(frozen=True)
class ShellState:
    """Time stamp plus shell amplitudes a_0..a_N (read-only array)."""

    t: float
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ShapeMismatch(f"state needs a 1-d array of at least 2 shells, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n_shells(self) -> int:
        return self.a.size - 1


@dataclass(frozen=True)
class Deviation:
    """b_j = a_j/c - lam^(-j/3): distance from the fixed point in the normalized frame."""

    b: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class DSequence:
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class SpectrumSample:
    k: np.ndarray
    energy: np.ndarray


StateLike = Union[ShellState, np.ndarray, "list[float]"]


def amplitudes(x: StateLike) -> np.ndarray:
    if isinstance(x, ShellState):
        return x.a
    return np.asarray(x, dtype=float)


def _check(a: np.ndarray, params: ModelParams) -> np.ndarray:
    if a.shape[-1] != params.size:
        raise ShapeMismatch(f"expected {params.size} shells, got {a.shape[-1]}")
    return a


# --- dynamics ------------------------------------------------------------


def fixed_point(params: ModelParams) -> ShellState:
    j = params.shells
    a = math.sqrt(params.f0) * np.exp2(params.g * (1.0 / 6.0 - j / 3.0))
    return ShellState(0.0, a)


def rhs_array(a: np.ndarray, params: ModelParams) -> np.ndarray:
    """Unchecked right-hand side on a 1-d amplitude array (integrator hot path)."""
    up = np.empty_like(a)
    up[:-1] = a[1:]
    up[-1] = a[-1]
    out = -params._coef_out * a * up
    out[1:] += params._coef_in * a[:-1] * a[:-1]
    out[0] += params.f0
    return out


def rhs(state: StateLike, params: ModelParams) -> np.ndarray:
    a = _check(amplitudes(state), params)
    if a.ndim != 1:
        raise ShapeMismatch("rhs takes a single state")
    return rhs_array(a, params)


def jacobian(a: np.ndarray, params: ModelParams) -> np.ndarray:
    """Dense (tridiagonal) Jacobian of :func:`rhs_array`."""
    n = params.size
    co, ci = params._coef_out, params._coef_in
    up = np.empty_like(a)
    up[:-1] = a[1:]
    up[-1] = a[-1]
    diag = -co * up
    diag[-1] *= 2.0  # last shell sees a_N * (ratio * a_N)
    jac = np.zeros((n, n))
    idx = np.arange(n)
    jac[idx, idx] = diag
    jac[idx[:-1], idx[1:]] = -co[:-1] * a[:-1]
    jac[idx[1:], idx[:-1]] = 2.0 * ci * a[:-1]
    return jac


# --- norms and metrics ---------------------------------------------------


def energy_norm(state: StateLike) -> float:
    a = amplitudes(state)
    return np.sqrt(np.sum(a * a, axis=-1))


def sobolev_weights(n: int, s: float) -> np.ndarray:
    return np.exp2(2.0 * s * np.arange(n))


def sobolev_norm(state: StateLike, s: float) -> float:
    """(sum_j 2^(2 s j) a_j^2)^(1/2)."""
    a = amplitudes(state)
    return np.sqrt(np.sum(sobolev_weights(a.shape[-1], s) * a * a, axis=-1))


def weak_distance(x: StateLike, y: StateLike, g: float = DEFAULT_G) -> float:
    """sum_j lam^(-j^2) |x_j - y_j| / (1 + |x_j - y_j|)."""
    xa, ya = amplitudes(x), amplitudes(y)
    if xa.shape != ya.shape:
        raise ShapeMismatch(f"length mismatch: {xa.shape} vs {ya.shape}")
    j = np.arange(xa.shape[-1], dtype=float)
    w = np.exp2(-g * j * j)
    w[w < np.finfo(float).tiny] = 0.0
    diff = np.abs(xa - ya)
    return float(np.sum(w * diff / (1.0 + diff)))


# --- change of variables -------------------------------------------------


def deviation_array(a: np.ndarray, params: ModelParams) -> np.ndarray:
    return a / params.frame_constant - params.lam_pow(-params.shells / 3.0)


def d_array(b: np.ndarray, params: ModelParams) -> np.ndarray:
    j = params.shells
    d = np.empty_like(b)
    d[..., 0] = params.lam_pow(-1.0 / 6.0) * b[..., 0]
    d[..., 1:] = params.lam_pow((j[1:] - 1.0) / 3.0) * (
        params.lam_pow(1.0 / 6.0) * b[..., 1:] - params.lam_pow(-1.0 / 6.0) * b[..., :-1]
    )
    return d


def to_deviation(state: StateLike, params: ModelParams) -> Deviation:
    return Deviation(deviation_array(_check(amplitudes(state), params), params))


def from_deviation(dev: Deviation, params: ModelParams, t: float = 0.0) -> ShellState:
    """Inverse of :func:`to_deviation`; ``t`` is the physical time stamp to attach."""
    b = _check(np.asarray(dev.b), params)
    return ShellState(t, params.frame_constant * (b + params.lam_pow(-params.shells / 3.0)))


def deviation_to_d(dev: Deviation, params: ModelParams) -> DSequence:
    return DSequence(d_array(_check(np.asarray(dev.b), params), params))


def d_to_deviation(d: DSequence, params: ModelParams) -> Deviation:
    dd = _check(np.asarray(d.d), params)
    return Deviation(params.lam_pow(1.0 / 6.0 - params.shells / 3.0) * np.cumsum(dd, axis=-1))


# --- flux, dissipation, spectrum -----------------------------------------


def energy_flux(state: StateLike, k: int, params: ModelParams) -> float:
    """Pi_k = lam^k a_k^2 a_(k+1), with a_(N+1) from the closure."""
    a = _check(amplitudes(state), params)
    if not 0 <= k <= params.n_shells:
        raise IndexError(f"shell index {k} outside [0, {params.n_shells}]")
    nxt = a[..., k + 1] if k < params.n_shells else params.closure_ratio * a[..., k]
    return params.lam_pow(k) * a[..., k] ** 2 * nxt


def dissipation_rate(state: StateLike, params: ModelParams) -> float:
    """Energy leaving through the truncation boundary, lam^(N-1/3) a_N^3 (0 for pure Galerkin)."""
    return energy_flux(state, params.n_shells, params)


def forcing_power(state: StateLike, params: ModelParams) -> float:
    """(f, a) = f0 a_0."""
    return params.f0 * _check(amplitudes(state), params)[..., 0]


def spectrum(state: StateLike) -> SpectrumSample:
    a = amplitudes(state)
    return SpectrumSample(np.exp2(np.arange(a.shape[-1], dtype=float)), a * a)
