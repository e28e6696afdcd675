import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svv.approx import (
    MAX_BERNSTEIN_DEGREE,
    approx_from_config,
    as_kernel,
    bernstein_fit,
    bernstein_operator,
    bernstein_shift,
    eval_factor_kernel,
    export_basis_csv,
    ou_discretize,
)
from svv.errors import ConfigError
from svv.io import read_csv
from svv.kernels import kernel_l2_distance, make_custom_kernel, make_fractional_kernel, make_power_kernel

# mass and barycentre of c_H a^(-H-1/2) da on the first cells (mpmath, 40 digits), H = 0.3, m = 10
OU_SIGMAS = [0.77219574127593259, 0.11482423646344722, 0.074928148607388609]
OU_ALPHAS = [0.063869229289271215, 0.55726055578361739, 0.9477091450018307]


def test_ou_weights_match_quadrature():
    b = ou_discretize(0.3, 10)
    np.testing.assert_allclose(b.sigmas[:3], OU_SIGMAS, rtol=1e-12)
    np.testing.assert_allclose(b.alphas[:3], OU_ALPHAS, rtol=1e-12)
    scale = (np.sqrt(10) * 0.4 / 4.4) ** 0.4
    np.testing.assert_allclose(b.taus, scale * np.arange(11) * 10**-0.2, rtol=1e-14)


def test_ou_kernel_value_oracle():
    b = ou_discretize(0.3, 10)
    assert eval_factor_kernel(b, 0.25) == pytest.approx(1.0697124681044295, rel=1e-12)


def test_ou_errors_decrease():
    k = make_fractional_kernel(0.3)
    errs = [kernel_l2_distance(k, as_kernel(ou_discretize(0.3, m))) for m in (10, 40, 160, 640)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_ou_rejects_smooth_kernels():
    with pytest.raises(ValueError, match="H < 1/2"):
        ou_discretize(0.6, 10)


def test_bernstein_reproduces_2u():
    k = make_custom_kernel(lambda u: 2 * u, T=1.0, H=1.0, value_at_zero=0.0)
    b = bernstein_fit(k, 3)
    np.testing.assert_allclose(b.kappas, [0, 2, 0, 0], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.integers(1, 40), st.floats(0.5, 3.0))
def test_bernstein_reproduces_linear(slope, m, T):
    k = make_custom_kernel(lambda u: slope * u, T=T, H=1.0, value_at_zero=0.0)
    u = np.linspace(0, T, 17)
    np.testing.assert_allclose(as_kernel(bernstein_fit(k, m))(u), slope * u, atol=1e-12 * (1 + abs(slope)))


def test_bernstein_value_oracle():
    b = bernstein_fit(make_power_kernel(0.4), 4)
    assert eval_factor_kernel(b, 0.3) == pytest.approx(0.5124137961188304, rel=1e-14)
    assert kernel_l2_distance(make_power_kernel(0.4), as_kernel(b)) == pytest.approx(0.09529348642147672, rel=1e-6)


@pytest.mark.parametrize("m", [5, 10, 30])
def test_monomial_and_bernstein_forms_agree(m):
    k = make_power_kernel(0.4)
    u = np.linspace(0, 1, 101)
    fit = bernstein_fit(k, m)
    np.testing.assert_allclose(eval_factor_kernel(fit, u), bernstein_operator(k, m)(u), atol=1e-9)
    np.testing.assert_allclose(as_kernel(fit)(u), bernstein_operator(k, m)(u), atol=1e-15)


def test_bernstein_kappa_formula_exact():
    # kappa_i = sum_j (-1)^(i-j) K(j/m) C(m,j) C(m-j,i-j) on T = 1
    from math import comb

    m = 6
    k = make_power_kernel(0.4)
    nodes = [Fraction(float(k(j / m))) for j in range(m + 1)]
    want = [float(sum((-1) ** (i - j) * nodes[j] * comb(m, j) * comb(m - j, i - j) for j in range(i + 1)))
            for i in range(m + 1)]
    np.testing.assert_array_equal(bernstein_fit(k, m).kappas, want)


def test_bernstein_preconditions():
    with pytest.raises(ValueError, match="K\\(0\\) = 0"):
        bernstein_fit(make_fractional_kernel(0.3), 5)
    with pytest.raises(ValueError, match="exceeds"):
        bernstein_fit(make_power_kernel(0.4), MAX_BERNSTEIN_DEGREE + 1)


def test_bernstein_sup_error_decreases():
    k = make_power_kernel(0.4)
    u = np.linspace(0, 1, 2001)
    errs = [np.max(np.abs(k(u) - bernstein_operator(k, m)(u))) for m in (4, 8, 16, 32, 64)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(2, 600), st.floats(0.0, 1.0))
def test_bernstein_shift_translates(m, n, x):
    def basis(p):
        return np.array([math.comb(m, j) * p**j * (1 - p) ** (m - j) for j in range(m + 1)])

    S, inject = bernstein_shift(m, n)
    h = 1.0 / n
    if x + h <= 1.0:
        np.testing.assert_allclose(S @ basis(x), basis(x + h), atol=1e-12)
    np.testing.assert_allclose(inject, basis(h), rtol=1e-12, atol=1e-300)


def test_export_and_config(tmp_path):
    b = ou_discretize(0.3, 5)
    cols = read_csv(export_basis_csv(b, tmp_path / "ou.csv"))
    np.testing.assert_array_equal(cols["sigma"], b.sigmas)
    k = make_power_kernel(0.4)
    assert approx_from_config({"scheme": "bernstein", "m": 7}, k).m == 7
    with pytest.raises(ConfigError):
        approx_from_config({"scheme": "ou", "m": 7}, k)
    with pytest.raises(ConfigError):
        approx_from_config({"scheme": "bernstein"}, k)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 80), st.floats(0.1, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_bernstein_keeps_hoelder_seminorm(m, lam, u, v):
    # u**lam has lam-Hoelder seminorm 1 on [0, 1]; the Bernstein operator cannot raise it
    bm = bernstein_operator(make_power_kernel(lam), m)
    lhs = abs(float(bm.eval(np.array([u]))[0] - bm.eval(np.array([v]))[0]))
    assert lhs <= abs(u - v) ** lam * (1 + 1e-9) + 1e-12
