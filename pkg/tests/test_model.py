import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from core.errors import ConfigurationError
from tunneling.model import (
    FieldSpec,
    FractionalOrder,
    MaskSpec,
    RampShape,
    SoftCoreSpec,
    SystemSpec,
    barrier_suppression_field,
    mask_value,
    ramp_envelope,
    riesz_symbol,
    soft_core,
    soft_core_suppression_field,
    total_potential,
)

alphas = st.floats(min_value=1.0001, max_value=2.0)
wavenumbers = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


@pytest.mark.parametrize("alpha", [1.0, 0.5, 2.0001, -1.5])
def test_fractional_order_bounds(alpha):
    with pytest.raises(ConfigurationError):
        FractionalOrder(alpha)


def test_fractional_order_accepts_two():
    assert float(FractionalOrder(2.0)) == 2.0
    assert FractionalOrder.coerce(1.5) == FractionalOrder(1.5)


def test_riesz_symbol_reduces_to_standard_kinetic_energy():
    k = np.linspace(-7.0, 7.0, 29)
    np.testing.assert_allclose(riesz_symbol(k, 2.0), 0.5 * k ** 2, rtol=1e-15)


def test_riesz_symbol_vanishes_only_at_zero():
    assert riesz_symbol(0.0, 1.3) == 0.0
    assert riesz_symbol(1.0, 1.3) == pytest.approx(0.5)


@given(alpha=alphas, k=wavenumbers)
def test_riesz_symbol_is_even(alpha, k):
    assert riesz_symbol(k, alpha) == riesz_symbol(-k, alpha)


@given(alpha=alphas, k1=wavenumbers, k2=wavenumbers)
def test_riesz_symbol_grows_with_wavenumber_magnitude(alpha, k1, k2):
    if abs(k1) <= abs(k2):
        assert riesz_symbol(k1, alpha) <= riesz_symbol(k2, alpha)


@given(a1=alphas, a2=alphas, k=st.floats(min_value=0.0, max_value=50.0, allow_nan=False))
def test_riesz_symbol_orders_cross_at_unit_wavenumber(a1, a2, k):
    lo, hi = sorted((a1, a2))
    if k > 1.0:
        assert riesz_symbol(k, lo) <= riesz_symbol(k, hi) * (1.0 + 1e-14)
    elif k < 1.0:
        assert riesz_symbol(k, lo) >= riesz_symbol(k, hi) * (1.0 - 1e-14)
    else:
        assert riesz_symbol(k, lo) == riesz_symbol(k, hi) == 0.5


def test_soft_core_values():
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    assert soft_core(0.0, spec) == pytest.approx(-1.0)
    assert soft_core(np.array([-3.0, 3.0]), spec) == pytest.approx([-1 / math.sqrt(10)] * 2)


@pytest.mark.parametrize("Z, a", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -0.5)])
def test_soft_core_rejects_non_positive_parameters(Z, a):
    with pytest.raises(ConfigurationError):
        SoftCoreSpec(Z=Z, a=a)


def test_sin2_ramp_envelope():
    field = FieldSpec(F0=0.05, ramp_shape="sin2", T_ramp=20.0)
    assert ramp_envelope(0.0, field) == 0.0
    assert ramp_envelope(10.0, field) == pytest.approx(0.5)
    assert ramp_envelope(20.0, field) == 1.0
    assert ramp_envelope(500.0, field) == 1.0
    values = [ramp_envelope(t, field) for t in np.linspace(0.0, 25.0, 101)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_linear_and_missing_ramps():
    linear = FieldSpec(F0=0.05, ramp_shape=RampShape.LINEAR, T_ramp=10.0)
    assert ramp_envelope(2.5, linear) == pytest.approx(0.25)
    assert ramp_envelope(0.0, FieldSpec(F0=0.05, ramp_shape="none")) == 1.0
    assert ramp_envelope(0.0, FieldSpec(F0=0.05, T_ramp=0.0)) == 1.0
    assert FieldSpec(F0=0.05, ramp_shape="none").ramp_end == 0.0


def test_total_potential_adds_length_gauge_field():
    spec = SoftCoreSpec()
    field = FieldSpec(F0=0.05, ramp_shape="none")
    x = np.array([-10.0, 0.0, 10.0])
    np.testing.assert_allclose(total_potential(x, spec, field, 5.0), soft_core(x, spec) + 0.05 * x)


def test_total_potential_rejects_negative_time():
    with pytest.raises(ConfigurationError):
        total_potential(0.0, SoftCoreSpec(), FieldSpec(F0=0.05), -1.0)


def test_field_spec_rejects_negative_field():
    with pytest.raises(ConfigurationError):
        FieldSpec(F0=-0.01)


@given(
    x=st.floats(min_value=-100.0, max_value=100.0),
    eta=st.floats(min_value=0.1, max_value=50.0),
    m=st.floats(min_value=2.0, max_value=12.0),
)
def test_mask_lies_in_unit_interval(x, eta, m):
    value = float(mask_value(x, MaskSpec(x_cap=80.0, eta=eta, m=m), 100.0))
    assert 0.0 < value <= 1.0
    if abs(x) <= 80.0:
        assert value == 1.0


def test_mask_strength_at_box_edge():
    spec = MaskSpec(x_cap=80.0, eta=5.0, m=4.0)
    assert float(mask_value(100.0, spec, 100.0)) == pytest.approx(math.exp(-5.0))
    assert float(mask_value(-90.0, spec, 100.0)) == pytest.approx(math.exp(-5.0 * 0.5 ** 4))


def test_mask_onset_must_be_inside_box():
    with pytest.raises(ConfigurationError):
        mask_value(0.0, MaskSpec(x_cap=100.0), 100.0)


def test_mask_is_continuous_at_onset():
    spec = MaskSpec(x_cap=80.0, eta=5.0, m=4.0)
    assert float(mask_value(80.0, spec, 100.0)) == 1.0
    assert float(mask_value(80.0 + 1e-6, spec, 100.0)) == pytest.approx(1.0, abs=1e-12)
    assert float(mask_value(-80.0 - 1e-6, spec, 100.0)) == pytest.approx(1.0, abs=1e-12)


def test_mask_decreases_toward_the_box_edge():
    x = np.linspace(80.0, 100.0, 201)
    values = mask_value(x, MaskSpec(x_cap=80.0, eta=5.0, m=4.0), 100.0)
    assert np.all(np.diff(values) <= 0.0)
    np.testing.assert_array_equal(values, mask_value(-x, MaskSpec(x_cap=80.0, eta=5.0, m=4.0), 100.0))


@pytest.mark.parametrize("eta, m", [(0.0, 4.0), (5.0, 1.0)])
def test_mask_spec_validation(eta, m):
    with pytest.raises(ConfigurationError):
        MaskSpec(x_cap=10.0, eta=eta, m=m)


def test_system_spec_coerces_alpha_and_drops_field():
    system = SystemSpec(alpha=1.5, potential=SoftCoreSpec(), field=FieldSpec(F0=0.05), mask=MaskSpec(x_cap=10.0))
    assert isinstance(system.alpha, FractionalOrder)
    free = system.field_free()
    assert free.field.F0 == 0.0
    assert free.mask is None


def test_barrier_suppression_field():
    assert barrier_suppression_field(0.67, 1.0) == pytest.approx(0.67 ** 2 / 4)


def _saddle_height(F, Z, a):
    s = brentq(lambda s: Z * s / (s * s + a * a) ** 1.5 - F, a / math.sqrt(2.0), 1e6)
    return -Z / math.sqrt(s * s + a * a) - F * s


@pytest.mark.parametrize("Ip", [0.3, 0.5, 0.67])
def test_soft_core_suppression_field_puts_saddle_at_minus_ip(Ip):
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    F = soft_core_suppression_field(Ip, spec)
    assert 0 < F < 2.0 / (3.0 * math.sqrt(3.0))
    assert _saddle_height(F, 1.0, 1.0) == pytest.approx(-Ip, abs=1e-9)


def test_soft_core_suppression_field_grows_with_ip():
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    fields = [soft_core_suppression_field(Ip, spec) for Ip in (0.2, 0.4, 0.6, 0.8)]
    assert fields == sorted(fields)


def test_soft_core_suppression_field_caps_at_saddle_disappearance():
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    assert soft_core_suppression_field(2.0, spec) == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)))
