import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from svv.approx import bernstein_fit
from svv.errors import ConfigError, NumericalError
from svv.hedging import (
    RegressionModel,
    call,
    constant_claim,
    digital,
    hedge_objective,
    identity_claim,
    lsmc_dataset,
    lsmc_fit,
    lsmc_hedge,
    n_poly_features,
    nmc_conditional,
    nmc_hedge_path,
    partition_indices,
    payoff_from_config,
    poly_exponents,
    ratio_se,
)
from svv.io import read_csv
from svv.kernels import make_constant_kernel
from svv.market import MarketSpec, simulate_joint, simulate_paths
from svv.noise import EVALUATION, uniform_grid
from svv.volatility import SandwichSpec

# E[C(0.1, X) (X - 5)] / E[(X - 5)^2] for X = 5 exp(W - 0.05), W ~ N(0, 0.1), C the
# unit-vol Black-Scholes call (strike 4) with 0.9 to expiry; mpmath quadrature
DISCRETE_BS_U0 = 0.78043246547944039


def _flat_market(y0=1.0):
    zero = make_constant_kernel(0.0)
    return MarketSpec(5.0, 0.5, SandwichSpec(0.01, 5.0, 4.0, 0.0, y0), zero, bernstein_fit(zero, 1))


def test_payoffs():
    assert call(4.0)(np.array([3.0, 6.0])).tolist() == [0.0, 2.0]
    assert digital(4.0, 2.0)(np.array([3.0, 6.0])).tolist() == [0.0, 2.0]
    assert identity_claim()(2.5) == 2.5
    assert constant_claim(3.0)(np.array([1.0, 2.0])).tolist() == [3.0, 3.0]
    with pytest.raises(ValueError):
        call(4.0)(0.0)
    with pytest.raises(ValueError):
        call(-1.0)
    assert payoff_from_config({"type": "call", "strike": 4}).to_config() == {"type": "call", "strike": 4.0}
    with pytest.raises(ConfigError):
        payoff_from_config({"type": "call"})
    with pytest.raises(ConfigError):
        payoff_from_config({"type": "straddle"})


def test_partitions():
    g = uniform_grid(1.0, 500)
    np.testing.assert_array_equal(partition_indices(g, 10), np.arange(0, 501, 50))
    np.testing.assert_array_equal(partition_indices(g, [0.0, 0.5, 1.0]), [0, 250, 500])
    with pytest.raises(ConfigError, match="refine"):
        partition_indices(uniform_grid(1.0, 512), 10)
    with pytest.raises(ConfigError):
        partition_indices(g, [0.0, 0.6, 0.4, 1.0])


def test_ratio_se_formula():
    # var(a/b) ~ (va - 2 r c + r^2 vb) / b^2
    assert ratio_se(2.0, 4.0, 0.2, 0.4, 0.0) == pytest.approx(math.sqrt(0.04 + 0.25 * 0.16) / 4)
    assert ratio_se(2.0, 4.0, 0.2, 0.4, 0.08) == pytest.approx(0.0, abs=1e-7)


def test_discrete_black_scholes_oracle():
    spec = _flat_market()
    g = uniform_grid(1.0, 100)
    est = nmc_conditional(spec, (5.0, 1.0, np.zeros(2)), 0.0, 0.1, g, call(4.0), 20_000, 17)
    assert est.den == pytest.approx(25 * math.expm1(0.1), rel=0.05)
    assert abs(est.ratio - DISCRETE_BS_U0) < 4 * est.se_ratio
    assert est.se_ratio < 0.1


def _discrete_bs_hedge(t, x, step=0.1, strike=4.0):
    # E[C(t + step, X') (X' - x)] / E[(X' - x)^2] under unit lognormal volatility
    def price(s, y):
        tau = 1.0 - s
        if tau < 1e-12:
            return max(y - strike, 0.0)
        d1 = (math.log(y / strike) + 0.5 * tau) / math.sqrt(tau)
        return y * norm.cdf(d1) - strike * norm.cdf(d1 - math.sqrt(tau))

    def integrand(z):
        y = x * math.exp(-0.5 * step + math.sqrt(step) * z)
        return price(t + step, y) * (y - x) * norm.pdf(z)

    return quad(integrand, -12, 12, limit=400)[0] / (x * x * math.expm1(step))


def test_nmc_path_matches_discrete_black_scholes():
    spec = _flat_market()
    g = uniform_grid(1.0, 100)
    jp = simulate_joint(spec, g, 4, 0, True)
    h = nmc_hedge_path(spec, jp, g, 10, call(4.0), 20_000, 4)
    idx = partition_indices(g, 10)[:-1]
    oracle = np.array([_discrete_bs_hedge(g.times[k], jp.x[k]) for k in idx])
    assert _discrete_bs_hedge(0.0, 5.0) == pytest.approx(DISCRETE_BS_U0, rel=1e-9)
    live = h.standard_errors > 0
    assert np.all(np.abs(h.values - oracle)[live] <= 4 * h.standard_errors[live])
    assert np.all(np.abs(h.values - oracle)[~live] < 1e-6)


def test_identity_and_constant_claims(holder_market):
    g = uniform_grid(1.0, 100)
    jp = simulate_joint(holder_market, g, 5, 0, True)
    ident, const = nmc_hedge_path(holder_market, jp, g, [0.0, 0.5, 1.0],
                                  [identity_claim(), constant_claim(1.0)], 3000, 5)
    assert np.all(np.abs(ident.values - 1.0) <= 3 * ident.standard_errors)
    assert np.all(np.abs(const.values) <= 3 * const.standard_errors)
    # reported u equals num/den exactly
    np.testing.assert_array_equal(ident.values, ident.num / ident.den)
    zero = nmc_hedge_path(holder_market, jp, g, 2, constant_claim(0.0), 100, 5)
    np.testing.assert_array_equal(zero.values, 0.0)


def test_nmc_is_reproducible_and_worker_independent(holder_market):
    g = uniform_grid(1.0, 50)
    jp = simulate_joint(holder_market, g, 1, 0, True)
    a = nmc_hedge_path(holder_market, jp, g, 2, call(4.0), 600, 3, workers=1)
    b = nmc_hedge_path(holder_market, jp, g, 2, call(4.0), 600, 3, workers=3)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.standard_errors, b.standard_errors)


def test_hedge_estimate_exports(tmp_path, holder_market):
    g = uniform_grid(1.0, 50)
    jp = simulate_joint(holder_market, g, 1, 0, True)
    h = nmc_hedge_path(holder_market, jp, g, 2, call(4.0), 200, 3)
    cols = read_csv(h.to_csv(tmp_path / "h.csv"))
    assert list(cols) == ["t", "u", "se"]
    np.testing.assert_array_equal(cols["u"], h.values)
    assert h.to_json(tmp_path / "h.json").exists()


def test_poly_features_count():
    assert n_poly_features(13, 2) == 105
    assert len(poly_exponents(3, 2)) == 10
    assert poly_exponents(2, 1) == [(), (0,), (1,)]


def test_lsmc_degree_zero_is_the_mean():
    spec = _flat_market(0.3)
    g = uniform_grid(1.0, 20)
    model = lsmc_fit(spec, g, 4, call(4.0), 400, degree=0, ridge=0.0, seed=2)
    jp = simulate_paths(spec, g, 2, np.arange(400), True, stream=2)
    idx = partition_indices(g, 4)
    dx = np.diff(jp.x[:, idx], axis=1)
    fx = np.maximum(jp.x[:, -1] - 4.0, 0.0)
    for j in range(4):
        n_, d_ = model.predict(j, np.array([[5.0, 0.3, 0.0, 0.0]]))
        assert n_[0] == pytest.approx(np.mean(fx * dx[:, j]), rel=1e-10)
        assert d_[0] == pytest.approx(np.mean(dx[:, j] ** 2), rel=1e-10)


def test_lsmc_identity_claim():
    spec = _flat_market(0.3)
    g = uniform_grid(1.0, 20)
    # degree 0: ratio of the sample means of X(T) dX and dX^2, which share their expectation
    m0 = lsmc_fit(spec, g, 4, identity_claim(), 20_000, degree=0, seed=9)
    jp = simulate_joint(spec, g, 9, 0, True)
    h0 = lsmc_hedge(m0, jp, g, 4)
    idx, inputs, num_t, den_t = lsmc_dataset(spec, g, 4, identity_claim(), 20_000, 9)
    for j in range(4):
        c = np.cov(num_t[:, j], den_t[:, j]) / 20_000
        se = ratio_se(num_t[:, j].mean(), den_t[:, j].mean(), math.sqrt(c[0, 0]), math.sqrt(c[1, 1]), c[0, 1])
        assert abs(h0.values[j] - 1.0) < 4 * se
    # with an intercept the in-sample mean of the fitted values equals the mean target
    m2 = lsmc_fit(spec, g, 4, identity_claim(), 20_000, degree=2, seed=9)
    for j in range(4):
        n_, d_ = m2.predict(j, inputs[j])
        assert n_.mean() == pytest.approx(num_t[:, j].mean(), rel=1e-6)
        assert d_.mean() == pytest.approx(den_t[:, j].mean(), rel=1e-6)
    h2 = lsmc_hedge(m2, jp, g, 4)
    np.testing.assert_array_equal(h2.values, h2.num / h2.den)
    assert h2.method == "LSMC" and not h2.standard_errors.any()


def test_lsmc_constant_claim_and_json(tmp_path):
    spec = _flat_market(0.3)
    g = uniform_grid(1.0, 20)
    jp = simulate_joint(spec, g, 9, 0, True)
    model = lsmc_fit(spec, g, 4, constant_claim(0.0), 200, seed=9)
    np.testing.assert_array_equal(lsmc_hedge(model, jp, g, 4).values, 0.0)
    model = lsmc_fit(spec, g, 4, call(4.0), 2000, seed=9)
    back = RegressionModel.from_json(model.to_json(tmp_path / "m.json"))
    np.testing.assert_array_equal(lsmc_hedge(back, jp, g, 4).values, lsmc_hedge(model, jp, g, 4).values)
    with pytest.raises(ConfigError, match="10x"):
        lsmc_fit(spec, g, 4, call(4.0), 50, degree=2)
    with pytest.raises(ConfigError, match="different partition"):
        lsmc_hedge(model, jp, g, 5)


def test_objective_baselines():
    spec = _flat_market(0.5)
    g = uniform_grid(1.0, 40)
    j0, se0 = hedge_objective(spec, g, np.zeros(4), call(4.0), 3000, 6)
    jp = simulate_paths(spec, g, 6, np.arange(3000), True, stream=EVALUATION)
    f2 = np.maximum(jp.x[:, -1] - 4.0, 0.0) ** 2
    assert j0 == pytest.approx(f2.mean(), rel=1e-13)
    assert se0 == pytest.approx(f2.std(ddof=1) / math.sqrt(3000), rel=1e-10)
    # telescoping: F - sum dX = X(0) on the full grid
    j1, se1 = hedge_objective(spec, g, np.ones(40), identity_claim(), 500, 6)
    assert j1 == pytest.approx(25.0, rel=1e-12)
    assert se1 < 1e-10


def test_delta_hedge_beats_no_hedge():
    spec = _flat_market(0.5)
    g = uniform_grid(1.0, 100)
    idx = partition_indices(g, 10)

    def bs_delta(j, x, y, f):
        tau = 1.0 - g.times[idx[j]]
        return norm.cdf((np.log(x / 4.0) + 0.125 * tau) / (0.5 * math.sqrt(tau)))

    jd, sed = hedge_objective(spec, g, bs_delta, call(4.0), 4000, 2, mode="adapted", partition=10)
    j0, se0 = hedge_objective(spec, g, np.zeros(10), call(4.0), 4000, 2)
    assert jd + 3 * math.hypot(sed, se0) < j0


def test_lsmc_hedge_refuses_nonpositive_denominator():
    g = uniform_grid(1.0, 10)
    spec = _flat_market()
    jp = simulate_joint(spec, g, 0, 0, True)
    model = RegressionModel(g.times[[0, 10]], 0, 0.0, [np.zeros(4)], [np.ones(4)],
                            [np.array([1.0])], [np.array([-1.0])], 100)
    with pytest.raises(NumericalError):
        lsmc_hedge(model, jp, g, 1)
