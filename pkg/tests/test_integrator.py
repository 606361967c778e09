import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic import integrator as integ
from dyadic import model, oracle
from dyadic.diagnostics import trapezoid
from dyadic.errors import ConfigError, MaxStepsExceeded, NonFiniteState, ShapeMismatch, StepSizeUnderflow
from dyadic.integrator import (
    Direction,
    EnergyNorm,
    EventSpec,
    ShellValue,
    SobolevNorm,
    StepControl,
    detect_event,
    enforce_positivity,
    integrate,
    step,
)
from dyadic.model import Closure, ModelParams, ShellState


def zero(p):
    return ShellState(0.0, np.zeros(p.size))


# --- control --------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"rtol": 0.0}, "rtol"),
        ({"atol": -1.0}, "atol"),
        ({"dt_min": 0.0}, "dt_min"),
        ({"dt_min": 2.0, "dt_max": 1.0}, "dt_min"),
        ({"dt_init": -1.0}, "dt_init"),
        ({"safety": 1.0}, "safety"),
        ({"max_steps": 0}, "max_steps"),
        ({"method": "euler"}, "method"),
    ],
)
def test_control_validation(kwargs, field):
    with pytest.raises(ConfigError) as info:
        StepControl(**kwargs)
    assert info.value.field == field


def test_auto_method_follows_stiffness():
    small = ModelParams(n_shells=4)
    large = ModelParams(n_shells=20)
    ctl = StepControl()
    assert integ.select_method(ctl, small, np.zeros(5), 2.0) == "dopri5"
    assert integ.select_method(ctl, large, np.zeros(21), 2.0) == "rodas3"
    assert integ.select_method(StepControl(method="rodas3"), small, np.zeros(5), 2.0) == "rodas3"


# --- positivity contract ----------------------------------------------------------


def test_positivity_clamps_small_undershoot():
    ctl = StepControl(atol=1e-10)
    ok, out = enforce_positivity(np.array([1.0, -5e-11, 0.2]), ctl)
    assert ok
    np.testing.assert_array_equal(out, [1.0, 0.0, 0.2])


def test_positivity_rejects_large_undershoot():
    ctl = StepControl(atol=1e-10)
    ok, _ = enforce_positivity(np.array([1.0, -2e-10]), ctl)
    assert not ok


def test_positivity_leaves_nonnegative_state_alone():
    a = np.array([0.0, 1.0])
    ok, out = enforce_positivity(a, StepControl())
    assert ok and out is a


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.0, 3.0))
def test_trajectories_stay_nonnegative(seed, scale):
    p = ModelParams(f0=1.0, n_shells=8)
    a0 = scale * np.random.default_rng(seed).uniform(0.0, 1.0, p.size)
    traj = integrate(ShellState(0.0, a0), p, t_end=2.0, sample_times=np.linspace(0.0, 2.0, 41))
    assert traj.amps.min() >= 0.0


# --- accuracy -----------------------------------------------------------------------


def test_fixed_point_stays_put():
    p = ModelParams(f0=1.0, n_shells=10)
    ctl = StepControl()
    traj = integrate(model.fixed_point(p), p, ctl, t_end=10.0, sample_times=np.linspace(0.0, 10.0, 11))
    a_hat = model.fixed_point(p).a
    assert np.max(np.abs(traj.amps - a_hat) / a_hat) <= 10 * ctl.rtol


def test_forcing_only_regime_grows_linearly():
    # while a_1 ~ f0^2 t^3 / 3 is negligible, a_0 = f0 t
    p = ModelParams(f0=2.0, n_shells=6)
    traj = integrate(zero(p), p, StepControl(rtol=1e-12, atol=1e-20), t_end=1e-3, sample_times=[0.0, 5e-4, 1e-3])
    np.testing.assert_allclose(traj.amps[1:, 0], [1e-3, 2e-3], rtol=1e-9)


def test_matches_rk4_reference_on_small_system():
    p = ModelParams(f0=1.0, n_shells=4)
    times = [0.5, 1.0, 2.0]
    traj = integrate(zero(p), p, StepControl(rtol=1e-12, atol=1e-16), t_end=2.0, sample_times=[0.0, *times])
    ref = oracle.rk4_reference(zero(p), p, 1e-4, times)
    np.testing.assert_allclose(traj.amps[1:], ref.states, rtol=1e-7)


def _fixed_step_errors(stepper_cls, counts):
    p = ModelParams(f0=1.0, n_shells=4)
    ref = oracle.rk4_reference(zero(p), p, 1e-5, [1.0]).states[-1]
    stepper = stepper_cls(p)
    errs = []
    for n in counts:
        y = np.zeros(p.size)
        fy = stepper.derivative(y)
        for _ in range(n):
            y, _, fy = stepper.attempt(y, fy, 1.0 / n)
        errs.append(np.max(np.abs(y - ref)))
    return np.polyfit(np.log(counts), np.log(errs), 1)[0]


def test_dormand_prince_order():
    slope = -_fixed_step_errors(integ._DormandPrince, [20, 40, 80, 160])
    assert 4.0 <= slope <= 5.5


def test_rosenbrock_order():
    slope = -_fixed_step_errors(integ._Rodas3, [20, 40, 80, 160])
    assert 2.7 <= slope <= 3.3


def test_methods_agree_on_moderately_stiff_run():
    p = ModelParams(f0=1.0, n_shells=8)
    ts = np.linspace(0.0, 3.0, 7)
    ctl = dict(rtol=1e-10, atol=1e-14)
    a = integrate(zero(p), p, StepControl(method="dopri5", **ctl), t_end=3.0, sample_times=ts).amps
    b = integrate(zero(p), p, StepControl(method="rodas3", **ctl), t_end=3.0, sample_times=ts).amps
    np.testing.assert_allclose(a[1:], b[1:], rtol=1e-6, atol=1e-12)


def test_hermite_reproduces_cubic():
    poly = np.poly1d([1.5, -2.0, 0.3, 4.0])
    d = poly.deriv()
    for t in (0.1, 0.5, 0.9):
        val = integ.hermite(0.0, poly(0.0), d(0.0), 1.0, poly(1.0), d(1.0), t)
        assert val == pytest.approx(poly(t), rel=1e-14)


# --- single step --------------------------------------------------------------------


def test_step_advances_time_and_suggests_next():
    p = ModelParams(f0=1.0, n_shells=4)
    res = step(zero(p), p, StepControl(), 1e-3)
    assert res.state.t == pytest.approx(res.dt_used)
    assert res.dt_used <= 1e-3 and res.dt_next > 0
    assert res.state.a[0] == pytest.approx(res.dt_used, rel=1e-6)


def test_step_rejects_oversized_step():
    p = ModelParams(f0=1.0, n_shells=10)
    res = step(model.fixed_point(p), p, StepControl(method="dopri5"), 1.0)
    assert res.dt_used < 1.0


def test_step_shape_and_finiteness_checks():
    p = ModelParams(n_shells=3)
    with pytest.raises(ShapeMismatch):
        step(ShellState(0.0, np.zeros(5)), p, StepControl(), 0.1)
    with pytest.raises(NonFiniteState):
        step(ShellState(0.0, [0.0, math.inf, 0.0, 0.0]), p, StepControl(), 0.1)


# --- integrate: errors and bookkeeping ---------------------------------------------


def test_integrate_argument_errors():
    p = ModelParams(n_shells=3)
    with pytest.raises(ConfigError):
        integrate(zero(p), p)
    with pytest.raises(ConfigError):
        integrate(zero(p), p, t_end=0.0)
    with pytest.raises(ConfigError):
        integrate(ShellState(0.0, [-1.0, 0, 0, 0]), p, t_end=1.0)
    with pytest.raises(ConfigError):
        integrate(zero(p), p, t_end=1.0, sample_times=[0.5, 0.2])
    with pytest.raises(ConfigError):
        integrate(zero(p), p, t_end=1.0, sample_times=[0.0, 2.0])
    with pytest.raises(ShapeMismatch):
        integrate(ShellState(0.0, np.zeros(3)), p, t_end=1.0)


def test_max_steps():
    p = ModelParams(n_shells=10)
    with pytest.raises(MaxStepsExceeded):
        integrate(zero(p), p, StepControl(max_steps=5), t_end=10.0)


def test_step_size_underflow():
    p = ModelParams(n_shells=10)
    with pytest.raises(StepSizeUnderflow):
        integrate(zero(p), p, StepControl(dt_min=0.1, dt_max=1.0, method="dopri5"), t_end=5.0)


def test_samples_and_endpoint():
    p = ModelParams(n_shells=6)
    ts = np.linspace(0.0, 2.0, 9)
    traj = integrate(zero(p), p, t_end=2.0, sample_times=ts)
    np.testing.assert_array_equal(traj.times, ts)
    assert len(traj) == 9
    assert traj.stats.accepted > 0
    np.testing.assert_array_equal(traj.amps[0], 0.0)
    assert traj.state(3).t == ts[3]
    assert traj.index_of(0.5) == 2 and traj.index_of(0.3) is None
    assert traj.window(0.5, 1.0).sum() == 3


def test_trajectory_is_read_only():
    p = ModelParams(n_shells=4)
    traj = integrate(zero(p), p, t_end=1.0)
    with pytest.raises(ValueError):
        traj.amps[0, 0] = 1.0


def test_runs_are_deterministic():
    p = ModelParams(f0=0.8, n_shells=12)
    a0 = model.fixed_point(p).a * 1.3
    ts = np.linspace(0.0, 5.0, 51)
    x = integrate(ShellState(0.0, a0), p, t_end=5.0, sample_times=ts).amps
    y = integrate(ShellState(0.0, a0), p, t_end=5.0, sample_times=ts).amps
    assert np.array_equal(x, y)


def test_galerkin_energy_grows_by_work_done():
    p = ModelParams(f0=1.0, n_shells=5, closure=Closure.PURE_GALERKIN)
    traj = integrate(zero(p), p, StepControl(rtol=1e-11, atol=1e-14), t_end=3.0,
                     sample_times=np.linspace(0.0, 3.0, 3001))
    work = 2.0 * trapezoid(traj.times, traj.forcing_power)
    assert traj.energy_sq[-1] == pytest.approx(work, rel=1e-6)
    assert np.all(traj.dissipation == 0.0)


# --- events ------------------------------------------------------------------------


def test_event_already_crossed_at_start():
    p = ModelParams(n_shells=4)
    spec = EventSpec(EnergyNorm(), 0.0, Direction.UP)
    traj = integrate(zero(p), p, t_end=1.0, events=[spec])
    assert traj.events[0].t == 0.0


def test_event_never_crossed():
    p = ModelParams(n_shells=4)
    traj = integrate(zero(p), p, t_end=1.0, events=[EventSpec(EnergyNorm(), math.inf)])
    assert traj.events == ()


def test_event_time_of_linear_growth():
    p = ModelParams(f0=1.0, n_shells=4)
    spec = EventSpec(ShellValue(0), 1e-3)
    traj = integrate(zero(p), p, StepControl(rtol=1e-12, atol=1e-16), t_end=0.01, events=[spec])
    assert traj.events[0].t == pytest.approx(1e-3, rel=1e-9)


def test_downward_event():
    p = ModelParams(f0=1.0, n_shells=6)
    start = model.fixed_point(p).a * 2.0
    spec = EventSpec(ShellValue(0), model.fixed_point(p).a[0] * 1.5, Direction.DOWN)
    traj = integrate(ShellState(0.0, start), p, t_end=5.0, sample_times=np.linspace(0, 5, 501), events=[spec])
    hit = traj.events[0]
    post = detect_event(traj, spec, tol=1e-10)
    assert hit.state.a[0] == pytest.approx(spec.threshold, rel=1e-6)
    assert post[0] == pytest.approx(hit.t, rel=1e-4)


def test_detect_event_on_samples():
    p = ModelParams(n_shells=4)
    traj = integrate(zero(p), p, t_end=1.0, sample_times=np.linspace(0, 1, 11))
    assert detect_event(traj, EventSpec(EnergyNorm(), math.inf)) is None
    assert detect_event(traj, EventSpec(EnergyNorm(), 0.0))[0] == 0.0


def test_shell_value_range():
    with pytest.raises(IndexError):
        ShellValue(7)(np.zeros(3))


def test_sobolev_event_index_must_be_finite():
    with pytest.raises(ConfigError):
        SobolevNorm(math.nan)


def _fill_time(n, threshold):
    p = ModelParams(f0=2 ** (-5 / 6), n_shells=n)
    spec = EventSpec(SobolevNorm(5 / 6), threshold)
    traj = integrate(zero(p), p, t_end=50.0, events=[spec])
    return traj.events[0].t


def test_h56_fill_time_with_fixed_threshold_decreases_in_n():
    times = [_fill_time(n, 0.9 * math.sqrt(7)) for n in (6, 10, 14, 18)]
    assert all(math.isfinite(t) for t in times)
    assert all(b < a for a, b in zip(times, times[1:]))


def test_h56_fill_time_with_scaled_threshold_converges():
    # threshold 0.9 sqrt(N+1) tracks the steady value, so the time rises to a limit
    times = [_fill_time(n, 0.9 * math.sqrt(n + 1)) for n in (6, 10, 14, 18)]
    gaps = np.diff(times)
    assert np.all(np.isfinite(times))
    assert np.all(gaps > 0)
    assert gaps[-1] < gaps[0] / 2
