import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic import model, oracle
from dyadic.errors import ConfigError, NonFiniteState
from dyadic.model import Closure, ModelParams, ShellState


def zero(p):
    return ShellState(0.0, np.zeros(p.size))


def test_oracle_derivative_is_independent_but_equal():
    p = ModelParams(f0=0.9, n_shells=7)
    a = np.random.default_rng(1).uniform(0, 1, p.size)
    ratio = 2.0 ** (-2.5 / 3)
    np.testing.assert_allclose(oracle._derivative(list(a), p.lam, p.f0, ratio), model.rhs(a, p), rtol=1e-13)


def test_rk4_keeps_fixed_point():
    p = ModelParams(f0=1.0, n_shells=6)
    res = oracle.rk4_reference(model.fixed_point(p), p, 1e-3, [0.01])
    a_hat = model.fixed_point(p).a
    assert np.max(np.abs(res.states[-1] - a_hat) / a_hat) <= 10 * 1e-13


def test_rk4_forcing_only_is_linear():
    p = ModelParams(f0=3.0, n_shells=3)
    res = oracle.rk4_reference(zero(p), p, 1e-5, [1e-4])
    assert res.states[-1][0] == pytest.approx(3e-4, rel=1e-12)


def test_rk4_richardson_ratio():
    p = ModelParams(f0=1.0, n_shells=4)
    fine = oracle.rk4_reference(zero(p), p, 2.5e-3, [2.0]).states[-1]
    mid = oracle.rk4_reference(zero(p), p, 5e-3, [2.0]).states[-1]
    coarse = oracle.rk4_reference(zero(p), p, 1e-2, [2.0]).states[-1]
    ratio = np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))
    assert ratio == pytest.approx(16.0, rel=0.1)


def test_rk4_dt_must_divide_samples():
    p = ModelParams(n_shells=3)
    with pytest.raises(ConfigError):
        oracle.rk4_reference(zero(p), p, 0.3, [1.0])


def test_rk4_reports_blow_up():
    p = ModelParams(f0=1.0, n_shells=3, closure=Closure.PURE_GALERKIN)
    with pytest.raises(NonFiniteState):
        oracle.rk4_reference(ShellState(0.0, [0.0, 0.0, 0.0, 1e3]), p, 1.0, [50.0])


def test_integrating_factor_limit_branch():
    p = ModelParams(f0=2.0, n_shells=4)
    out = oracle.integrating_factor_step(zero(p), p, 0.1)
    np.testing.assert_array_equal(out.a, [0.2, 0, 0, 0, 0])
    assert out.t == pytest.approx(0.1)


@settings(max_examples=200, deadline=None)
@given(
    a=st.lists(st.floats(0.0, 1e3, allow_nan=False), min_size=3, max_size=16),
    dt=st.floats(1e-12, 1e2),
    closure=st.sampled_from(list(Closure)),
)
def test_integrating_factor_preserves_nonnegativity(a, dt, closure):
    p = ModelParams(f0=1.0, n_shells=len(a) - 1, closure=closure)
    out = oracle.integrating_factor_step(ShellState(0.0, a), p, dt).a
    assert np.all(out >= 0.0)


def test_integrating_factor_consistency():
    p = ModelParams(f0=1.0, n_shells=5)
    a = np.random.default_rng(5).uniform(0.1, 1.0, p.size)
    exact = model.rhs(a, p)
    errs = []
    for dt in (1e-4, 1e-5, 1e-6):
        approx = (oracle.integrating_factor_step(ShellState(0.0, a), p, dt).a - a) / dt
        errs.append(np.max(np.abs(approx - exact)))
    assert errs[1] < errs[0] / 5 and errs[2] < errs[1] / 5


def test_integrating_factor_first_order():
    p = ModelParams(f0=1.0, n_shells=4)
    ref = oracle.rk4_reference(zero(p), p, 1e-4, [1.0]).states[-1]
    errs = [np.max(np.abs(oracle.integrating_factor_solve(zero(p), p, dt, 1.0).a - ref)) for dt in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 0.9) & (orders < 1.1))


def test_series_first_term():
    assert oracle.series_partial_sums(2**2.5, 1) == pytest.approx(2 ** (5 / 6), rel=1e-15)


def test_series_closed_form():
    lam = 2**2.5
    closed = lam ** (1 / 3) / (1 - lam ** (-2 / 3)) ** 2
    assert abs(oracle.series_partial_sums(lam, 10_000) - closed) <= 1e-9
    assert closed == pytest.approx(3.79712, abs=2e-5)


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.2, 6.0), n=st.integers(1, 60))
def test_series_monotone_and_bounded(g, n):
    lam = 2.0**g
    closed = lam ** (1 / 3) / (1 - lam ** (-2 / 3)) ** 2
    lo, hi = oracle.series_partial_sums(lam, n), oracle.series_partial_sums(lam, n + 1)
    # later terms eventually drop below one ulp of the running sum
    assert lo <= hi
    assert hi <= closed * (1 + 1e-12)


def test_series_large_lambda_first_term_dominates():
    lam = 2.0**40
    assert oracle.series_partial_sums(lam, 50) == pytest.approx(lam ** (1 / 3), rel=1e-7)


def test_series_rejects_small_lambda():
    with pytest.raises(ConfigError):
        oracle.series_partial_sums(1.0, 3)
