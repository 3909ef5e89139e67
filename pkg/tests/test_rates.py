import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import DegenerateInputError, NoPlateauError, RateError, SlopeFitError
from tunneling.grid import make_grid
from tunneling.prop import gaussian_wavefunction
from tunneling.rates import (
    DecayTrace,
    estimate_total_time,
    fit_rate,
    fit_slope,
    fit_window,
    instantaneous_rate,
    shift_window,
    survival_probability,
)

TIMES = np.arange(0.0, 1001.0, 1.0)


def _exponential(gamma=0.02, scale=1.0, ramp_end=0.0):
    return DecayTrace(TIMES, scale * np.exp(-gamma * TIMES), x_c=10.0, ramp_end=ramp_end)


def test_survival_probability_of_centered_gaussian():
    grid = make_grid(40.0, 512)
    psi = gaussian_wavefunction(grid)
    assert survival_probability(psi, 10.0) == pytest.approx(1.0, abs=1e-12)
    assert survival_probability(psi, 1.0) == pytest.approx(math.erf(1.0), abs=0.05)


@pytest.mark.parametrize("x_c", [0.0, -1.0, 40.0, 50.0])
def test_survival_probability_needs_region_inside_box(x_c):
    psi = gaussian_wavefunction(make_grid(40.0, 512))
    with pytest.raises(RateError):
        survival_probability(psi, x_c)


@pytest.mark.parametrize(
    "times, Pb",
    [
        ([0.0, 1.0], [1.0]),
        ([0.0, 2.0, 1.0], [1.0, 0.9, 0.8]),
        ([0.0, 1.0, 2.0], [1.0, 1.5, 0.8]),
        ([0.0, 1.0, 2.0], [1.0, -0.1, 0.8]),
        ([0.0, 1.0, 2.0], [1.0, np.nan, 0.8]),
    ],
)
def test_decay_trace_validation(times, Pb):
    with pytest.raises(RateError):
        DecayTrace(times, Pb, x_c=5.0)


def test_instantaneous_rate_of_exponential_is_constant():
    times, rate = instantaneous_rate(_exponential(0.03))
    np.testing.assert_allclose(times, TIMES)
    np.testing.assert_allclose(rate, 0.03, rtol=1e-9)


def test_instantaneous_rate_needs_positive_samples():
    trace = DecayTrace([0.0, 1.0, 2.0], [1.0, 0.5, 0.0], x_c=5.0)
    with pytest.raises(RateError):
        instantaneous_rate(trace)
    with pytest.raises(RateError):
        instantaneous_rate(DecayTrace([0.0, 1.0], [1.0, 0.5], x_c=5.0))


def test_pure_exponential_recovered_exactly():
    fit = fit_rate(_exponential(0.02))
    assert fit.gamma == pytest.approx(0.02, rel=1e-10)
    assert fit.P0 == pytest.approx(1.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (0.0, 1000.0)
    assert fit.measurable
    assert fit.n_points == TIMES.size


def test_biexponential_recovers_slow_component():
    Pb = 0.9 * np.exp(-0.02 * TIMES) + 0.1 * np.exp(-0.5 * TIMES)
    fit = fit_rate(DecayTrace(TIMES, Pb, x_c=10.0))
    assert fit.gamma == pytest.approx(0.02, rel=0.01)
    assert fit.t1 > 0.0
    assert fit.P0 == pytest.approx(0.9, rel=0.01)


def test_fit_ignores_samples_before_ramp_end():
    # Strong transient during the ramp, clean decay afterwards
    Pb = np.where(TIMES < 100.0, np.exp(-0.1 * TIMES), np.exp(-10.0 - 0.02 * (TIMES - 100.0)))
    fit = fit_rate(DecayTrace(TIMES, Pb, x_c=10.0, ramp_end=100.0))
    assert fit.t1 >= 100.0
    assert fit.gamma == pytest.approx(0.02, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(min_value=0.05, max_value=1.0), gamma=st.floats(min_value=1e-4, max_value=0.05))
def test_rate_does_not_depend_on_trace_normalization(scale, gamma):
    reference = fit_rate(_exponential(gamma))
    scaled = fit_rate(_exponential(gamma, scale=scale))
    assert scaled.gamma == pytest.approx(reference.gamma, rel=1e-9)
    assert scaled.P0 == pytest.approx(scale * reference.P0, rel=1e-9)


def test_decay_below_rate_floor_is_not_measurable(caplog):
    trace = DecayTrace(TIMES, np.ones_like(TIMES), x_c=10.0)
    with caplog.at_level(logging.INFO, logger="tunneling.rates"):
        fit = fit_rate(trace)
    assert not fit.measurable
    assert fit.gamma == 0.0
    assert "no measurable decay" in caplog.text


def test_oscillating_rate_has_no_plateau():
    Pb = np.exp(-0.02 * TIMES - 0.5 * (1.0 - np.cos(0.5 * TIMES)))
    with pytest.raises(NoPlateauError):
        fit_rate(DecayTrace(TIMES, Pb, x_c=10.0))


def test_trace_shorter_than_min_window_has_no_plateau():
    t = np.arange(0.0, 40.0, 1.0)
    with pytest.raises(NoPlateauError):
        fit_rate(DecayTrace(t, np.exp(-0.02 * t), x_c=10.0), min_window=50.0)


def test_fit_window_over_explicit_range():
    fit = fit_window(_exponential(0.01), 200.0, 400.0)
    assert fit.gamma == pytest.approx(0.01, rel=1e-10)
    assert fit.window == (200.0, 400.0)
    assert fit.n_points == 201


@pytest.mark.parametrize("t1, t2", [(400.0, 200.0), (10.0, 10.0), (10.2, 11.5)])
def test_fit_window_rejects_bad_ranges(t1, t2):
    with pytest.raises(RateError):
        fit_window(_exponential(), t1, t2)


def test_growing_survival_probability_is_rejected():
    Pb = np.exp(0.0001 * (TIMES - 1000.0))
    with pytest.raises(RateError):
        fit_window(DecayTrace(TIMES, Pb, x_c=10.0), 0.0, 1000.0)


@pytest.mark.parametrize("fraction", [-0.1, 0.1])
def test_shifted_window_keeps_exponential_rate(fraction):
    trace = _exponential(0.02)
    fit = fit_window(trace, 200.0, 600.0)
    shifted = shift_window(trace, fit, fraction)
    assert shifted.gamma == pytest.approx(0.02, rel=1e-9)
    assert shifted.t1 == pytest.approx(200.0 + fraction * 400.0)


@settings(max_examples=40, deadline=None)
@given(
    m=st.floats(min_value=0.1, max_value=2.0),
    intercept=st.floats(min_value=-3.0, max_value=3.0),
    fields=st.lists(st.integers(min_value=20, max_value=100), min_size=3, max_size=8, unique=True),
)
def test_slope_fit_recovers_exact_line(m, intercept, fields):
    points = [(k / 1000.0, math.exp(-(m * 1000.0 / k + intercept))) for k in fields]
    fit = fit_slope(points, alpha=1.5)
    assert fit.m_alpha == pytest.approx(m, rel=1e-7)
    assert fit.intercept == pytest.approx(intercept, abs=1e-6)
    assert fit.points == sorted(points)


@settings(max_examples=25, deadline=None)
@given(factor=st.floats(min_value=1e-3, max_value=1e3))
def test_slope_fit_ignores_common_rate_prefactor(factor):
    points = [(0.04, 1e-6), (0.05, 3e-5), (0.06, 2e-4), (0.07, 8e-4)]
    base = fit_slope(points)
    scaled = fit_slope([(F0, factor * gamma) for F0, gamma in points])
    assert scaled.m_alpha == pytest.approx(base.m_alpha, rel=1e-9)
    assert scaled.intercept == pytest.approx(base.intercept - math.log(factor), abs=1e-8)


def test_slope_fit_input_errors():
    with pytest.raises(SlopeFitError):
        fit_slope([(0.04, 1e-5), (0.05, 1e-4)])
    with pytest.raises(DegenerateInputError):
        fit_slope([(0.04, 1e-5), (0.04, 2e-5), (0.05, 1e-4)])
    with pytest.raises(SlopeFitError):
        fit_slope([(0.04, 0.0), (0.05, 1e-4), (0.06, 1e-3)])


def test_estimate_total_time_bounds(caplog):
    assert estimate_total_time(0.01, 0.05, T_min=2000.0, T_max=20000.0) == 2000.0
    # exp(-C/F0) = 1e-3 gives 20 / 1e-3 = 20000
    C = 0.05 * math.log(1000.0)
    assert estimate_total_time(C * 0.9, 0.05, T_min=2000.0, T_max=1e6) == pytest.approx(20.0 / math.exp(-0.9 * C / 0.05))
    with caplog.at_level(logging.DEBUG, logger="tunneling.rates"):
        assert estimate_total_time(1.0341, 0.04, T_min=2000.0, T_max=20000.0) == 20000.0
    assert "capped" in caplog.text
    assert all(record.levelno < logging.WARNING for record in caplog.records)
    with pytest.raises(RateError):
        estimate_total_time(1.0, 0.0)
