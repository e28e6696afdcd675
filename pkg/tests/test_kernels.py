import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svv.errors import ConfigError
from svv.kernels import (
    kernel_from_config,
    kernel_l2_distance,
    make_constant_kernel,
    make_custom_kernel,
    make_fractional_kernel,
    make_power_kernel,
)

INV_GAMMA_08 = 0.85893701922466746  # mpmath, 40 digits


def test_fractional_kernel_values():
    k = make_fractional_kernel(0.3)
    assert k(1.0) == pytest.approx(INV_GAMMA_08, rel=1e-14)
    assert k(0.25) == pytest.approx(0.25**-0.2 * INV_GAMMA_08, rel=1e-14)
    assert k.value_at_zero is None
    assert math.isnan(k.lag_values(4, 0.25)[0])


def test_power_kernel_is_finite_at_zero():
    k = make_power_kernel(0.4)
    assert k(0.0) == 0.0
    assert k.H == pytest.approx(0.4)
    np.testing.assert_allclose(k(np.array([0.5, 1.0])), [0.5**0.4, 1.0])


def test_l2_closed_forms():
    zero = make_constant_kernel(0.0)
    # int_0^1 u^0.8 du = 1/1.8
    assert kernel_l2_distance(make_power_kernel(0.4), zero) == pytest.approx(math.sqrt(1 / 1.8), rel=1e-6)
    # int_0^1 u^-0.4 du / Gamma(0.8)^2 = 1/(0.6 Gamma(0.8)^2)
    frac = make_fractional_kernel(0.3)
    assert kernel_l2_distance(frac, zero) == pytest.approx(INV_GAMMA_08 / math.sqrt(0.6), rel=1e-5)


def test_l2_against_quadrature_oracle():
    from svv.approx import as_kernel, ou_discretize

    frac = make_fractional_kernel(0.3)
    d = kernel_l2_distance(frac, as_kernel(ou_discretize(0.3, 10)))
    assert d == pytest.approx(0.2170262370688685, rel=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.05, 1.5), st.floats(0.05, 1.5))
def test_l2_is_a_metric(a, b, c):
    ka, kb, kc = (make_power_kernel(e) for e in (a, b, c))
    n = 4096
    dab = kernel_l2_distance(ka, kb, n)
    assert dab >= 0
    assert dab == pytest.approx(kernel_l2_distance(kb, ka, n), abs=1e-15)
    assert dab <= kernel_l2_distance(ka, kc, n) + kernel_l2_distance(kc, kb, n) + 1e-12
    assert kernel_l2_distance(ka, ka, n) == 0.0


def test_custom_kernel_and_config():
    k = make_custom_kernel(lambda u: 2 * u, T=2.0, H=1.0, value_at_zero=0.0)
    assert k(1.5) == 3.0
    assert kernel_from_config({"type": "power", "exponent": 0.4}).name == "power"
    assert kernel_from_config({"type": "fractional", "H": 0.3}).to_config() == {"type": "fractional", "H": 0.3}
    with pytest.raises(ConfigError):
        kernel_from_config({"type": "mystery"})
    with pytest.raises(ConfigError):
        kernel_from_config({"type": "power"})
