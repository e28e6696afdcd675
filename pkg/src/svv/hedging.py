"""Payoffs, the pre-limit mean-square hedge and its Monte Carlo estimators.

On a partition ``t_0 < ... < t_n`` the optimal simple strategy holds

    u_k = E[F(X(T)) dX_k | F_k] / E[dX_k**2 | F_k],   dX_k = X(t_{k+1}) - X(t_k),

on ``(t_k, t_{k+1}]``. Both conditional expectations are estimated either by
nested simulation from the current Markov state (NMC) or by regression on
simulated states (LSMC).
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, NumericalError
from .io import to_jsonable, write_csv
from .market import JointPath, MarketSpec, inner_increments, resume_joint, simulate_paths
from .noise import EVALUATION, LSMC_TRAIN, TimeGrid, factor_model
from .parallel import map_blocks

DEFAULT_RIDGE = 1e-8
INNER_BLOCK = 2048


# --------------------------------------------------------------------------
# payoffs
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Payoff:
    """``F = F1 + F2`` with ``F1`` Lipschitz and ``F2`` of bounded variation."""

    lipschitz_part: Callable[[np.ndarray], np.ndarray]
    bv_part: Callable[[np.ndarray], np.ndarray]
    lipschitz_const: float
    kind: str = "custom"
    params: dict[str, float] = field(default_factory=dict)

    def __call__(self, x):
        return payoff_eval(self, x)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def to_config(self) -> dict[str, Any]:
        if self.kind == "custom":
            raise ConfigError("custom payoffs have no config representation")
        return {"type": self.kind, **self.params}


def _zero(x):
    return np.zeros(np.shape(x))


def call(strike: float) -> Payoff:
    if not strike > 0:
        raise ValueError(f"call strike must be positive, got {strike}")
    k = float(strike)
    return Payoff(lambda x: np.maximum(x - k, 0.0), _zero, 1.0, "call", {"strike": k})


def digital(level: float, amount: float = 1.0) -> Payoff:
    lv, a = float(level), float(amount)
    return Payoff(_zero, lambda x: np.where(x > lv, a, 0.0), 0.0, "digital", {"level": lv, "amount": a})


def identity_claim() -> Payoff:
    return Payoff(lambda x: np.asarray(x, dtype=float), _zero, 1.0, "identity")


def constant_claim(value: float = 1.0) -> Payoff:
    v = float(value)
    return Payoff(lambda x: np.full(np.shape(x), v), _zero, 0.0, "constant", {"value": v})


def payoff_from_config(cfg: dict[str, Any]) -> Payoff:
    kind = cfg.get("type")
    try:
        if kind == "call":
            return call(float(cfg["strike"]))
        if kind == "digital":
            return digital(float(cfg["level"]), float(cfg.get("amount", 1.0)))
        if kind == "identity":
            return identity_claim()
        if kind == "constant":
            return constant_claim(float(cfg.get("value", 1.0)))
    except KeyError as exc:
        raise ConfigError(f"payoff.{exc.args[0]}: missing for type {kind!r}") from None
    except ValueError as exc:
        raise ConfigError(f"payoff: {exc}") from None
    raise ConfigError(f"payoff.type: unknown payoff {kind!r}")


def payoff_eval(p: Payoff, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("payoffs are defined for positive prices only")
    out = np.asarray(p.lipschitz_part(x_arr), dtype=float) + np.asarray(p.bv_part(x_arr), dtype=float)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------


def partition_indices(grid: TimeGrid, partition) -> np.ndarray:
    """Grid indices of a partition given as a count ``n`` (uniform) or as times."""
    if np.ndim(partition) == 0:
        n = int(partition)
        if n < 1:
            raise ValueError("a partition needs at least one interval")
        times = grid.T * np.arange(n + 1) / n
    else:
        times = np.asarray(partition, dtype=float)
    try:
        idx = np.array([grid.index_of(t) for t in times], dtype=np.int64)
    except ValueError:
        raise ConfigError("the simulation grid must refine the hedging partition") from None
    if idx[0] != 0 or idx[-1] != grid.N or np.any(np.diff(idx) <= 0):
        raise ConfigError("partition must run from 0 to T through increasing grid points")
    return idx


# --------------------------------------------------------------------------
# nested Monte Carlo
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalEstimate:
    num: float
    den: float
    se_num: float
    se_den: float
    cov: float  # covariance of the two sample means
    n_inner: int

    @property
    def ratio(self) -> float:
        return self.num / self.den

    @property
    def se_ratio(self) -> float:
        return ratio_se(self.num, self.den, self.se_num, self.se_den, self.cov)


def ratio_se(num, den, se_num, se_den, cov) -> float:
    """Delta-method standard error of ``num / den``."""
    r = num / den
    var = (se_num**2 - 2.0 * r * cov + r * r * se_den**2) / (den * den)
    return math.sqrt(max(var, 0.0))


def _stats(a: np.ndarray, b: np.ndarray, n: int) -> ConditionalEstimate:
    ma, mb = float(np.mean(a)), float(np.mean(b))
    cov = np.cov(a, b, ddof=1)
    return ConditionalEstimate(
        ma, mb, math.sqrt(cov[0, 0] / n), math.sqrt(cov[1, 1] / n), float(cov[0, 1] / n), n
    )


def inner_samples(
    spec: MarketSpec,
    grid: TimeGrid,
    state,
    k: int,
    k_next: int,
    payoffs: Sequence[Payoff],
    n_inner: int,
    seed: int,
    workers: int | None = None,
    block: int = INNER_BLOCK,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path ``F(X(T)) dX`` (one row per payoff) and ``dX**2`` from resumed paths."""
    need_T = any(not p.is_constant for p in payoffs)
    stop = grid.N if need_T else k_next
    L = stop - k
    x_k = float(np.asarray(state[0]).reshape(-1)[0])

    def work(lo, hi):
        dB1, dB2 = inner_increments(grid, seed, k, L, np.arange(lo, hi))
        seg = resume_joint(spec, state, k, grid, dB1, dB2)
        dx = seg.x[:, k_next - k] - x_k
        xt = seg.x[:, -1]
        fx = np.stack([np.asarray(payoff_eval(p, xt), dtype=float) * dx for p in payoffs])
        return fx, dx * dx

    parts = map_blocks(work, n_inner, workers, block)
    return np.concatenate([p[0] for p in parts], axis=1), np.concatenate([p[1] for p in parts])


def nmc_conditional(
    spec: MarketSpec,
    state,
    t_k: float,
    t_next: float,
    grid: TimeGrid,
    payoff: Payoff | Sequence[Payoff],
    n_inner: int,
    seed: int,
    workers: int | None = None,
):
    """Nested estimate of ``E[F dX | state]`` and ``E[dX**2 | state]``.

    ``state = (x, y, factors)`` at ``t_k``. Several payoffs may share one set
    of inner paths; a list of payoffs returns a list of estimates.
    """
    if spec.approx is None:
        raise ConfigError("nested Monte Carlo needs a Markovian factor basis")
    if n_inner < 2:
        raise ValueError("n_inner must be at least 2")
    k, k_next = grid.index_of(t_k), grid.index_of(t_next)
    if not k < k_next:
        raise ValueError("t_k must precede t_next")
    many = not isinstance(payoff, Payoff)
    payoffs = list(payoff) if many else [payoff]
    a, b = inner_samples(spec, grid, state, k, k_next, payoffs, n_inner, seed, workers)
    out = []
    for row in a:
        est = _stats(row, b, n_inner)
        if not est.den > 0:
            raise NumericalError(f"E[dX^2] estimate is {est.den} at t = {t_k}: degenerate zero-vol state")
        out.append(est)
    return out if many else out[0]


@dataclass(eq=False)
class HedgeEstimate:
    times: np.ndarray  # partition t_0..t_n
    values: np.ndarray  # u_0..u_{n-1}
    standard_errors: np.ndarray
    method: str
    inner_samples: int
    num: np.ndarray | None = None
    den: np.ndarray | None = None
    se_num: np.ndarray | None = None
    se_den: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def to_csv(self, path) -> Path:
        return write_csv(path, {"t": self.times[:-1], "u": self.values, "se": self.standard_errors})

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable({
            "method": self.method, "inner_samples": self.inner_samples, "times": self.times,
            "values": self.values, "standard_errors": self.standard_errors,
            "num": self.num, "den": self.den, "se_num": self.se_num, "se_den": self.se_den,
            "meta": self.meta,
        })

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


def _joint_state(joint: JointPath, k: int):
    x, y, f = joint.state(k)
    if f is None:
        raise ConfigError(f"the outer path carries no factor state at grid index {k}")
    return float(x), float(y), f


def nmc_hedge_path(
    spec: MarketSpec,
    joint: JointPath,
    grid: TimeGrid,
    partition,
    payoff: Payoff | Sequence[Payoff],
    n_inner: int,
    seed: int,
    workers: int | None = None,
):
    """NMC hedge along one outer path (from ``simulate_joint`` with ``use_approx``)."""
    idx = partition_indices(grid, partition)
    many = not isinstance(payoff, Payoff)
    payoffs = list(payoff) if many else [payoff]
    rows = []
    for j in range(idx.size - 1):
        k = int(idx[j])
        ests = nmc_conditional(
            spec, _joint_state(joint, k), grid.times[k], grid.times[idx[j + 1]], grid,
            payoffs, n_inner, seed, workers,
        )
        rows.append(ests)
    out = []
    for p_i, p in enumerate(payoffs):
        e = [r[p_i] for r in rows]
        num = np.array([x.num for x in e])
        den = np.array([x.den for x in e])
        out.append(HedgeEstimate(
            grid.times[idx], num / den, np.array([x.se_ratio for x in e]), "NMC", int(n_inner),
            num, den, np.array([x.se_num for x in e]), np.array([x.se_den for x in e]),
            {"payoff": p.kind, "seed": int(seed)},
        ))
    return out if many else out[0]


# --------------------------------------------------------------------------
# least-squares Monte Carlo
# --------------------------------------------------------------------------


def poly_exponents(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    """Monomials of total degree <= ``degree`` as index tuples (``()`` is the intercept)."""
    out: list[tuple[int, ...]] = []
    for d in range(degree + 1):
        out.extend(itertools.combinations_with_replacement(range(n_vars), d))
    return out


def n_poly_features(n_vars: int, degree: int) -> int:
    return math.comb(n_vars + degree, degree)


def poly_features(z: np.ndarray, exps: list[tuple[int, ...]]) -> np.ndarray:
    out = np.empty((z.shape[0], len(exps)))
    for j, e in enumerate(exps):
        col = np.ones(z.shape[0])
        for i in e:
            col = col * z[:, i]
        out[:, j] = col
    return out


@dataclass(eq=False)
class RegressionModel:
    """Per rebalance time: numerator and denominator coefficients on standardised features."""

    times: np.ndarray
    degree: int
    ridge: float
    means: list[np.ndarray]
    scales: list[np.ndarray]
    coef_num: list[np.ndarray]
    coef_den: list[np.ndarray]
    n_outer: int
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return int(self.means[0].size)

    def features(self, j: int, inputs: np.ndarray) -> np.ndarray:
        z = (np.atleast_2d(inputs) - self.means[j]) / self.scales[j]
        return poly_features(z, poly_exponents(self.n_vars, self.degree))

    def predict(self, j: int, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        phi = self.features(j, inputs)
        return phi @ self.coef_num[j], phi @ self.coef_den[j]

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable({
            "times": self.times, "degree": self.degree, "ridge": self.ridge,
            "means": self.means, "scales": self.scales,
            "coef_num": self.coef_num, "coef_den": self.coef_den,
            "n_outer": self.n_outer, "meta": self.meta,
            "features": "all monomials of total degree <= degree in standardised (x, y, factors)",
        })

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_json(cls, path) -> "RegressionModel":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        arr = lambda v: [np.asarray(a, dtype=float) for a in v]  # noqa: E731
        return cls(
            np.asarray(d["times"], dtype=float), int(d["degree"]), float(d["ridge"]),
            arr(d["means"]), arr(d["scales"]), arr(d["coef_num"]), arr(d["coef_den"]),
            int(d["n_outer"]), d.get("meta", {}),
        )


def state_inputs(x, y, factors) -> np.ndarray:
    """Regression inputs ``(x, y, factor_1, ...)``, one row per state."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    f = np.atleast_2d(np.asarray(factors, dtype=float))
    if f.shape[0] != x.size:
        f = np.broadcast_to(f, (x.size, f.shape[-1]))
    return np.column_stack([x, y, f])


FIT_CHUNK = 65536


def _ridge_lstsq(z: np.ndarray, targets: np.ndarray, exps, ridge: float) -> np.ndarray:
    """Minimise ``|Phi b - target|**2 / n + ridge |b|**2`` for each target column.

    Uses a chunked QR of ``[Phi | targets]`` (TSQR), so ``Phi^T Phi`` is never
    formed: with heavy-tailed prices the squared condition number of the
    normal equations wipes out most significant digits. The ridge enters as
    ``sqrt(n ridge) I`` rows appended before the final triangular solve.
    """
    n = z.shape[0]
    p = len(exps)
    r = np.zeros((0, p + targets.shape[1]))
    for lo in range(0, n, FIT_CHUNK):
        block = np.hstack([poly_features(z[lo:lo + FIT_CHUNK], exps), targets[lo:lo + FIT_CHUNK]])
        r = np.linalg.qr(np.vstack([r, block]), mode="r")
    if ridge > 0:
        aug = np.zeros((p, r.shape[1]))
        aug[:, :p] = math.sqrt(n * ridge) * np.eye(p)
        r = np.linalg.qr(np.vstack([r, aug]), mode="r")
    if r.shape[0] < p:
        raise NumericalError("fewer regression rows than features")
    diag = np.abs(np.diag(r[:p, :p]))
    if not diag.min() > 1e-12 * diag.max():
        raise NumericalError("regression design is singular even after the ridge")
    return solve_triangular(r[:p, :p], r[:p, p:])


def lsmc_dataset(
    spec: MarketSpec, grid: TimeGrid, partition, payoff: Payoff, n_outer: int, seed: int,
    workers: int | None = None, stream: int = LSMC_TRAIN,
):
    """Inputs and both targets at every rebalance time, from ``n_outer`` outer paths."""
    if spec.approx is None:
        raise ConfigError("LSMC needs a Markovian factor basis")
    idx = partition_indices(grid, partition)
    rec = idx[:-1]

    def work(lo, hi):
        jp = simulate_paths(spec, grid, seed, np.arange(lo, hi), True, record=rec, stream=stream,
                            keep_increments=False)
        xs = jp.x[:, idx]
        fx = np.asarray(payoff_eval(payoff, jp.x[:, -1]), dtype=float)
        dx = np.diff(xs, axis=1)
        inputs = np.stack([state_inputs(xs[:, j], jp.y[:, idx[j]], jp.factors[:, j]) for j in range(rec.size)])
        return inputs, fx[:, None] * dx, dx * dx

    parts = map_blocks(work, n_outer, workers)
    inputs = np.concatenate([p[0] for p in parts], axis=1)  # (n_rebalance, n_outer, n_vars)
    num_t = np.concatenate([p[1] for p in parts], axis=0)  # (n_outer, n_rebalance)
    den_t = np.concatenate([p[2] for p in parts], axis=0)
    return idx, inputs, num_t, den_t


def lsmc_fit(
    spec: MarketSpec,
    grid: TimeGrid,
    partition,
    payoff: Payoff,
    n_outer: int,
    degree: int = 2,
    ridge: float = DEFAULT_RIDGE,
    seed: int = 0,
    workers: int | None = None,
) -> RegressionModel:
    """Polynomial ridge regression of ``F(X(T)) dX_k`` and ``dX_k**2`` on the state at ``t_k``."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    d_state = factor_model(spec.approx, grid).dim + 2
    n_feat = n_poly_features(d_state, degree)
    if n_outer < 10 * n_feat:
        raise ConfigError(f"n_outer = {n_outer} is below 10x the {n_feat} regression features")
    idx, inputs, num_t, den_t = lsmc_dataset(spec, grid, partition, payoff, n_outer, seed, workers)
    exps = poly_exponents(d_state, degree)
    means, scales, cn, cd = [], [], [], []
    for j in range(idx.size - 1):
        z = inputs[j]
        mu = z.mean(axis=0)
        sd = z.std(axis=0)
        # (numerically) constant inputs: a rounding-level spread must not be blown up
        sd = np.where(sd > 1e-9 * np.maximum(1.0, np.abs(mu)), sd, 1.0)
        coef = _ridge_lstsq((z - mu) / sd, np.column_stack([num_t[:, j], den_t[:, j]]), exps, ridge)
        means.append(mu)
        scales.append(sd)
        cn.append(np.ascontiguousarray(coef[:, 0]))
        cd.append(np.ascontiguousarray(coef[:, 1]))
    return RegressionModel(
        grid.times[idx], int(degree), float(ridge), means, scales, cn, cd, int(n_outer),
        {"payoff": payoff.kind, "seed": int(seed)},
    )


def lsmc_hedge(model: RegressionModel, joint: JointPath, grid: TimeGrid, partition) -> HedgeEstimate:
    idx = partition_indices(grid, partition)
    if idx.size != np.size(model.times) or not np.allclose(grid.times[idx], model.times):
        raise ConfigError("regression model was fitted on a different partition")
    nums, dens = [], []
    for j in range(idx.size - 1):
        x, y, f = _joint_state(joint, int(idx[j]))
        n, d = model.predict(j, state_inputs(x, y, f))
        if not d[0] > 0:
            raise NumericalError(
                f"fitted E[dX^2] is {d[0]} at t = {grid.times[idx[j]]}: state outside the training cloud?"
            )
        nums.append(float(n[0]))
        dens.append(float(d[0]))
    num, den = np.array(nums), np.array(dens)
    return HedgeEstimate(
        grid.times[idx], num / den, np.zeros(num.size), "LSMC", int(model.n_outer), num, den,
        meta={"degree": model.degree},
    )


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------


def hedge_objective(
    spec: MarketSpec,
    grid: TimeGrid,
    strategy,
    payoff: Payoff,
    n_paths: int,
    seed: int,
    mode: str = "frozen",
    partition=None,
    workers: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[(F(X(T)) - sum_k u_k dX_k)**2]`` and its SE.

    ``mode="frozen"``: ``strategy`` is a ``HedgeEstimate`` (or a sequence of
    numbers) applied unchanged to every path. ``mode="adapted"``: ``strategy``
    is a ``RegressionModel`` or a callable ``(j, x, y, factors) -> u`` evaluated
    on each path's own states.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if mode not in ("frozen", "adapted"):
        raise ValueError(f"unknown objective mode {mode!r}")
    if partition is None:
        partition = strategy.times if hasattr(strategy, "times") else len(strategy)
    idx = partition_indices(grid, partition)
    use_approx = spec.approx is not None
    rec = idx[:-1] if (mode == "adapted" and use_approx) else ()
    if mode == "frozen":
        u_fixed = np.asarray(getattr(strategy, "values", strategy), dtype=float)
        if u_fixed.size != idx.size - 1:
            raise ValueError("strategy length does not match the partition")

    def work(lo, hi):
        jp = simulate_paths(spec, grid, seed, np.arange(lo, hi), use_approx, record=rec,
                            stream=EVALUATION, keep_increments=False)
        dx = np.diff(jp.x[:, idx], axis=1)
        if mode == "frozen":
            gains = dx @ u_fixed
        else:
            u = np.empty_like(dx)
            for j in range(idx.size - 1):
                k = int(idx[j])
                f = jp.factors[:, j] if jp.factors is not None else np.zeros((hi - lo, 0))
                if isinstance(strategy, RegressionModel):
                    n_, d_ = strategy.predict(j, state_inputs(jp.x[:, k], jp.y[:, k], f))
                    u[:, j] = n_ / d_
                else:
                    u[:, j] = strategy(j, jp.x[:, k], jp.y[:, k], f)
            gains = np.sum(u * dx, axis=1)
        return (np.asarray(payoff_eval(payoff, jp.x[:, -1])) - gains) ** 2

    err2 = np.concatenate(map_blocks(work, n_paths, workers))
    return float(np.mean(err2)), float(np.std(err2, ddof=1) / math.sqrt(n_paths))
