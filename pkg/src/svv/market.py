"""Discounted price, undiscounting and joint simulation of (Z, Y, X).

The discounted price follows the left-point log-Euler scheme

    X_{k+1} = X_k exp(-Y_k**2 dt / 2 + Y_k (rho dB1_k + sqrt(1 - rho**2) dB2_k)),

which keeps ``X`` positive and makes it an exact discrete martingale.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .approx import FactorBasis, OUBasis, approx_from_config, as_kernel
from .errors import AssumptionError, ConfigError
from .kernels import VolterraKernel, kernel_from_config
from .noise import (
    NMC_INNER,
    OUTER,
    TimeGrid,
    convolve_lags,
    factor_model,
    path_rng,
    sample_increments,
    sample_increments_batch,
)
from .volatility import SandwichSpec, hoelder_gamma_ok, sandwich_from_config, simulate_vol, vol_continue


@dataclass(frozen=True, eq=False)
class MarketSpec:
    x0: float
    rho: float
    sandwich: SandwichSpec
    kernel: VolterraKernel
    approx: FactorBasis | None = None
    nu: float | Callable = 0.0
    check_gamma: bool = True

    def __post_init__(self):
        if not self.x0 > 0:
            raise AssumptionError(f"x0 must be positive, got {self.x0}")
        if not abs(self.rho) < 1:
            raise AssumptionError(f"|rho| < 1 required, got rho = {self.rho}")
        if self.check_gamma and self.sandwich.c > 0 and not hoelder_gamma_ok(self.sandwich.gamma, self.kernel.H):
            raise AssumptionError(
                f"gamma > 1/H - 1 violated: gamma = {self.sandwich.gamma}, "
                f"1/H - 1 = {1.0 / self.kernel.H - 1.0}"
            )
        if self.approx is not None and not math.isclose(self.approx.T, self.kernel.T, rel_tol=1e-12):
            raise ConfigError("approx horizon differs from kernel horizon")

    @property
    def rho_bar(self) -> float:
        return math.sqrt(1.0 - self.rho * self.rho)

    def with_approx(self, approx: FactorBasis | None) -> "MarketSpec":
        return MarketSpec(self.x0, self.rho, self.sandwich, self.kernel, approx, self.nu, self.check_gamma)


def market_from_config(cfg: dict[str, Any], T: float) -> MarketSpec:
    for sec in ("market", "sandwich", "kernel"):
        if sec not in cfg:
            raise ConfigError(f"{sec}: section missing")
    mk = cfg["market"]
    for key in ("x0", "rho"):
        if key not in mk:
            raise ConfigError(f"market.{key}: missing")
    kernel = kernel_from_config(cfg["kernel"], T)
    approx = approx_from_config(cfg["approx"], kernel) if "approx" in cfg else None
    return MarketSpec(
        float(mk["x0"]), float(mk["rho"]), sandwich_from_config(cfg["sandwich"]), kernel, approx,
        float(mk.get("nu", 0.0)),
    )


def log_increments(spec: MarketSpec, y: np.ndarray, dB1, dB2, dt) -> np.ndarray:
    yl = y[..., :-1]
    return -0.5 * yl * yl * dt + yl * (spec.rho * dB1 + spec.rho_bar * dB2)


def simulate_discounted(spec: MarketSpec, vol, dB1, dB2, dt=None, x_start=None) -> np.ndarray:
    """Left-point log-Euler path(s) of ``X``.

    ``vol`` is a ``VolPath`` or an array of ``Y`` values aligned with the
    increments (one more column). ``dt`` defaults to the VolPath time steps.
    """
    if hasattr(vol, "values"):
        y = np.asarray(vol.values, dtype=float)
        dt = np.diff(vol.times) if dt is None else dt
    else:
        y = np.asarray(vol, dtype=float)
    dB1 = np.asarray(dB1, dtype=float)
    dB2 = np.asarray(dB2, dtype=float)
    if dt is None:
        raise ValueError("dt is required when vol is a plain array")
    if y.shape[-1] != dB1.shape[-1] + 1 or dB1.shape != dB2.shape:
        raise ValueError(f"misaligned inputs: Y {y.shape}, dB1 {dB1.shape}, dB2 {dB2.shape}")
    x0 = spec.x0 if x_start is None else np.asarray(x_start, dtype=float)
    logx = np.zeros(y.shape)
    np.cumsum(log_increments(spec, y, dB1, dB2, dt), axis=-1, out=logx[..., 1:])
    x0 = np.asarray(x0, dtype=float)
    return (x0[..., None] if x0.ndim else x0) * np.exp(logx)


def rate_integral(nu, times) -> np.ndarray:
    """``int_0^{t_k} nu`` by the trapezoid rule on ``times``."""
    times = np.asarray(times, dtype=float)
    if callable(nu):
        v = np.broadcast_to(np.asarray(nu(times), dtype=float), times.shape)
    else:
        v = np.full(times.shape, float(nu))
    out = np.zeros(times.shape)
    np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(times), out=out[1:])
    return out


def undiscount(x_path, nu, grid: TimeGrid) -> np.ndarray:
    """``S(t_k) = exp(int_0^{t_k} nu) X(t_k)``."""
    return np.exp(rate_integral(nu, grid.times)) * np.asarray(x_path, dtype=float)


@dataclass(eq=False)
class JointPath:
    """One path, or a batch when the arrays are 2-D (paths along axis 0).

    ``factors`` holds factor states at grid indices ``factor_index``
    (all grid points for a single ``simulate_joint`` path).
    """

    times: np.ndarray
    dB1: np.ndarray
    dB2: np.ndarray
    z: np.ndarray
    y: np.ndarray
    x: np.ndarray
    factors: np.ndarray | None = None
    factor_index: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def state(self, k: int):
        """``(x, y, factors)`` at grid index ``k`` (factors ``None`` if not recorded)."""
        f = None
        if self.factors is not None:
            pos = np.flatnonzero(self.factor_index == k)
            if pos.size:
                f = self.factors[..., pos[0], :]
        return self.x[..., k], self.y[..., k], f


def _noise(spec: MarketSpec, grid: TimeGrid, dB1: np.ndarray, use_approx: bool, record):
    if use_approx:
        if spec.approx is None:
            raise ConfigError("use_approx requested but the market has no factor basis")
        fm = factor_model(spec.approx, grid)
        return fm.simulate(dB1, record=record)
    if not spec.kernel.is_difference:
        raise ConfigError("direct convolution needs a difference kernel")
    lags = spec.kernel.lag_values(grid.N, grid.dt)
    return convolve_lags(lags, dB1), None


def simulate_paths(
    spec: MarketSpec,
    grid: TimeGrid,
    master_seed: int,
    path_indices,
    use_approx: bool,
    record=(),
    stream: int = OUTER,
    keep_increments: bool = True,
) -> JointPath:
    """Batch version of ``simulate_joint`` for the given path indices."""
    spec.sandwich.check_step(float(grid.steps.max()))
    dB1, dB2 = sample_increments_batch(grid, master_seed, path_indices, (stream,))
    record = np.asarray(record, dtype=np.int64)
    z, states = _noise(spec, grid, dB1, use_approx, record)
    y = simulate_vol(spec.sandwich, z, grid).values
    x = simulate_discounted(spec, y, dB1, dB2, grid.steps)
    if not keep_increments:
        dB1 = dB2 = None
    return JointPath(
        grid.times, dB1, dB2, z, y, x, states, record if states is not None else None,
        {"use_approx": use_approx, "master_seed": int(master_seed)},
    )


def simulate_joint(
    spec: MarketSpec, grid: TimeGrid, master_seed: int, path_index: int, use_approx: bool
) -> JointPath:
    """One path of the full system; factor states are recorded at every grid point."""
    inc = sample_increments(grid, master_seed, path_index)
    spec.sandwich.check_step(float(grid.steps.max()))
    record = np.arange(grid.N + 1) if use_approx else np.empty(0, dtype=np.int64)
    z, states = _noise(spec, grid, inc.dB1[None, :], use_approx, record)
    y = simulate_vol(spec.sandwich, z[0], grid).values
    x = simulate_discounted(spec, y, inc.dB1, inc.dB2, grid.steps)
    f = states[0] if states is not None else None
    return JointPath(
        grid.times, inc.dB1, inc.dB2, z[0], y, x, f, record if use_approx else None,
        {"use_approx": use_approx, "master_seed": int(master_seed), "path_index": int(path_index)},
    )


def resume_joint(spec: MarketSpec, state, k: int, grid: TimeGrid, dB1_tail, dB2_tail) -> JointPath:
    """Continue from ``state = (x, y, factors)`` at grid index ``k`` with fresh increments.

    ``dB1_tail`` and ``dB2_tail`` have shape ``(n, L)`` (or ``(L,)``) covering
    grid steps ``k .. k + L - 1``. The factor state may be a single row,
    which is then shared by all ``n`` continuations.
    """
    if spec.approx is None:
        raise AssumptionError("resume needs a Markovian factor basis (market.approx is not set)")
    x_k, y_k, factors = state
    single = np.ndim(dB1_tail) == 1
    dB1 = np.atleast_2d(np.asarray(dB1_tail, dtype=float))
    dB2 = np.atleast_2d(np.asarray(dB2_tail, dtype=float))
    n, L = dB1.shape
    if k + L > grid.N:
        raise ValueError(f"tail of length {L} from index {k} overruns the grid (N = {grid.N})")
    fm = factor_model(spec.approx, grid)
    factors = np.atleast_2d(np.asarray(factors, dtype=float))
    if factors.shape[-1] != fm.dim:
        raise ValueError(f"factor state has dimension {factors.shape[-1]}, basis needs {fm.dim}")
    times = grid.times[k : k + L + 1]
    if L == 0:
        z = fm.z_at(factors, k)[:, None] * np.ones((n, 1))
    elif factors.shape[0] == 1:
        # shared start: deterministic projection once, plus the fresh convolution
        proj = fm.project(factors, k, np.arange(k, k + L + 1))
        z = proj + convolve_lags(fm.lags, dB1)
    else:
        z = fm.continue_paths(factors, k, dB1)
    y = vol_continue(spec.sandwich, y_k, z, times)
    x = simulate_discounted(spec, y, dB1, dB2, np.diff(times), x_start=np.broadcast_to(x_k, (n,)))
    out = JointPath(times, dB1, dB2, z, y, x, meta={"resumed_at": int(k)})
    if single:
        out = JointPath(times, dB1[0], dB2[0], z[0], y[0], x[0], meta=out.meta)
    return out


def inner_increments(grid: TimeGrid, master_seed: int, k: int, L: int, inner_indices, stream=NMC_INNER):
    """Fresh increments for steps ``k .. k + L - 1``, keyed by (stream, k, inner index)."""
    idx = np.asarray(inner_indices, dtype=np.int64)
    sq = np.sqrt(grid.steps[k : k + L])
    dB1 = np.empty((idx.size, L))
    dB2 = np.empty((idx.size, L))
    for r, i in enumerate(idx):
        zz = path_rng(master_seed, stream, k, int(i)).standard_normal((2, L))
        dB1[r] = zz[0] * sq
        dB2[r] = zz[1] * sq
    return dB1, dB2


def export_joint_csv(path, jp: JointPath, with_factors: bool = False) -> None:
    from .io import write_csv

    n = jp.times.size
    cols = {"t": jp.times}
    for name in ("dB1", "dB2"):
        v = getattr(jp, name)
        if v is not None and np.ndim(v) == 1:
            cols[name] = np.append(v, np.nan)
    cols.update({"Z": jp.z, "Y": jp.y, "X": jp.x})
    if with_factors and jp.factors is not None and jp.factors.shape[0] == n:
        for i in range(jp.factors.shape[1]):
            cols[f"V_{i + 1}"] = jp.factors[:, i]
    write_csv(path, cols)


def is_ou(spec: MarketSpec) -> bool:
    return isinstance(spec.approx, OUBasis)


def approx_kernel(spec: MarketSpec) -> VolterraKernel:
    return as_kernel(spec.approx) if spec.approx is not None else spec.kernel
