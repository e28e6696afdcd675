"""Brownian increments, Volterra noise and its Markov factor representations.

Every path draws from its own Philox stream keyed by
``(master_seed, stream, *indices)``, so a path is reproducible on its own
and batches can be cut up between workers in any way.

The discrete noise is the left-point convolution

    Z(t_j) = sum_{i < j} K(t_j - t_i) dB1_i,

which the OU and Bernstein factor recursions reproduce exactly when ``K`` is
the corresponding separable approximant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz

from . import _loops
from .approx import BernsteinBasis, FactorBasis, OUBasis, _bernstein_form, as_kernel, bernstein_shift
from .kernels import VolterraKernel

# stream tags
OUTER = 0
NMC_INNER = 1
LSMC_TRAIN = 2
EVALUATION = 3


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a time grid needs at least two points")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)

    @property
    def N(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @cached_property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @cached_property
    def uniform(self) -> bool:
        return bool(np.allclose(self.steps, self.T / self.N, rtol=1e-10, atol=0.0))

    @property
    def dt(self) -> float:
        if not self.uniform:
            raise ValueError("grid is not uniform")
        return self.T / self.N

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[k], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"time {t} is not a grid point")
        return k


def uniform_grid(T: float, N: int) -> TimeGrid:
    if N < 1:
        raise ValueError("N must be at least 1")
    times = T * np.arange(N + 1) / N
    return TimeGrid(times)


@dataclass(frozen=True, eq=False)
class BrownianIncrements:
    dB1: np.ndarray
    dB2: np.ndarray
    master_seed: int
    path_index: int


def path_rng(master_seed: int, *tags: int) -> np.random.Generator:
    """Philox generator keyed by ``(master_seed, *tags)``."""
    key = np.random.SeedSequence([int(master_seed), *map(int, tags)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw(grid: TimeGrid, master_seed: int, tags) -> np.ndarray:
    z = path_rng(master_seed, *tags).standard_normal((2, grid.N))
    return z * np.sqrt(grid.steps)


def sample_increments(
    grid: TimeGrid, master_seed: int, path_index: int, stream: int = OUTER
) -> BrownianIncrements:
    d = _draw(grid, master_seed, (stream, path_index))
    return BrownianIncrements(d[0], d[1], int(master_seed), int(path_index))


def sample_increments_batch(
    grid: TimeGrid, master_seed: int, path_indices, stream_tags=(OUTER,)
) -> tuple[np.ndarray, np.ndarray]:
    """Increments for many paths; row ``r`` equals the single-path draw of ``path_indices[r]``."""
    idx = np.asarray(path_indices, dtype=np.int64)
    dB1 = np.empty((idx.size, grid.N))
    dB2 = np.empty((idx.size, grid.N))
    for r, i in enumerate(idx):
        d = _draw(grid, master_seed, (*stream_tags, int(i)))
        dB1[r] = d[0]
        dB2[r] = d[1]
    return dB1, dB2


# --------------------------------------------------------------------------
# direct convolution
# --------------------------------------------------------------------------


def convolution_matrix(lags: np.ndarray, n_steps: int) -> np.ndarray:
    """Upper-triangular Toeplitz ``A`` with ``Z[:, 1:] = dB @ A``.

    ``lags[l] = K(l dt)``; entry ``lags[0]`` is never used.
    """
    first_row = lags[1 : n_steps + 1]
    first_col = np.zeros(n_steps)
    first_col[0] = lags[1]
    return toeplitz(first_col, first_row)


def convolve_lags(lags: np.ndarray, dB1: np.ndarray) -> np.ndarray:
    dB1 = np.atleast_2d(dB1)
    n, n_steps = dB1.shape
    z = np.zeros((n, n_steps + 1))
    if n_steps and np.any(lags[1 : n_steps + 1] != 0.0):
        z[:, 1:] = dB1 @ convolution_matrix(lags, n_steps)
    return z


def volterra_convolution(kernel: VolterraKernel, inc, grid: TimeGrid) -> np.ndarray:
    """Left-point Riemann sum of ``int_0^t K(t - s) dB1(s)`` on a uniform grid.

    ``inc`` is a ``BrownianIncrements`` or an array of ``dB1`` (one path per
    row). Lags are always ``>= dt``, so singular kernels are fine.
    """
    if not kernel.is_difference:
        raise ValueError("convolution needs a difference kernel")
    if not grid.uniform:
        raise ValueError("direct convolution requires a uniform grid")
    dB1 = inc.dB1 if isinstance(inc, BrownianIncrements) else np.asarray(inc, dtype=float)
    lags = kernel.lag_values(grid.N, grid.dt)
    z = convolve_lags(lags, dB1)
    return z[0] if np.ndim(dB1) == 1 else z


# --------------------------------------------------------------------------
# factor states and single steps
# --------------------------------------------------------------------------


@dataclass
class FactorState:
    """OU factor values ``V_i`` or Bernstein power moments ``M_p`` at grid index ``k``.

    Power moments are taken in rescaled time ``s = t / T``:
    ``M_p = sum_{j < k} (t_j / T)**p dB1_j``. They are the single-step
    form; batch simulation uses the better conditioned lag factors of
    ``BernsteinFactorModel``.
    """

    values: np.ndarray
    k: int = 0


def initial_state(basis: FactorBasis) -> FactorState:
    d = basis.m if isinstance(basis, OUBasis) else basis.m + 1
    return FactorState(np.zeros(d), 0)


def factor_step(basis: OUBasis, state: FactorState, dB1_k: float, dt: float) -> FactorState:
    """One OU step ``V_i <- exp(-alpha_i dt) (V_i + sigma_i dB1_k)``."""
    if state.values.shape != (basis.m,):
        raise ValueError(f"state has dimension {state.values.shape}, basis has m={basis.m}")
    v = np.exp(-basis.alphas * dt) * (state.values + basis.sigmas * dB1_k)
    return FactorState(v, state.k + 1)


def bernstein_factor_step(
    basis: BernsteinBasis, state: FactorState, dB1_k: float, t_k: float
) -> FactorState:
    """One moment update ``M_p <- M_p + (t_k / T)**p dB1_k``."""
    if state.values.shape != (basis.m + 1,):
        raise ValueError(f"state has dimension {state.values.shape}, basis needs {basis.m + 1}")
    s = t_k / basis.T
    mom = state.values + s ** np.arange(basis.m + 1) * dB1_k
    return FactorState(mom, state.k + 1)


def bernstein_recon_weights(basis: BernsteinBasis, s) -> np.ndarray:
    """Weights ``w_p(s)`` with ``Z_m(t) = sum_p w_p(t / T) M_p``.

    ``w_p(s) = (-1)**p sum_{i >= p} kappa'_i C(i, p) s**(i - p)`` from the
    binomial expansion of ``(s - s_j)**i``; summed with ``math.fsum``.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    m = basis.m
    kap = basis.unit_kappas
    out = np.empty((s_arr.size, m + 1))
    for p in range(m + 1):
        i = np.arange(p, m + 1)
        coef = kap[p:] * np.array([math.comb(int(ii), p) for ii in i], dtype=float)
        terms = coef[None, :] * s_arr[:, None] ** (i - p)[None, :]
        sign = -1.0 if p % 2 else 1.0
        out[:, p] = [sign * math.fsum(row) for row in terms]
    return out


def reconstruct_z(basis: FactorBasis, state: FactorState, t: float | None = None) -> float:
    """``Z_m`` at the state's time (``t`` needed for Bernstein)."""
    if isinstance(basis, OUBasis):
        return float(np.sum(state.values))
    if t is None:
        raise ValueError("Bernstein reconstruction needs the current time")
    w = bernstein_recon_weights(basis, t / basis.T)[0]
    return float(math.fsum(w * state.values))


# --------------------------------------------------------------------------
# batch factor models on a fixed grid
# --------------------------------------------------------------------------


class FactorModel:
    """A factor basis bound to a uniform grid, with batch simulation helpers."""

    def __init__(self, basis: FactorBasis, grid: TimeGrid):
        if not grid.uniform:
            raise ValueError("factor recursions need a uniform grid")
        if not math.isclose(basis.T, grid.T, rel_tol=1e-12):
            raise ValueError(f"basis horizon {basis.T} differs from grid horizon {grid.T}")
        self.basis = basis
        self.grid = grid

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @cached_property
    def lags(self) -> np.ndarray:
        return as_kernel(self.basis).lag_values(self.grid.N, self.grid.dt)

    def simulate(self, dB1, start=None, k0: int = 0, record=()):
        """Run the recursion over ``dB1`` (shape ``(n, L)``) starting at grid index ``k0``.

        Returns ``(z, states)`` with ``z`` of shape ``(n, L + 1)`` and the factor
        states at the relative step indices in ``record``.
        """
        raise NotImplementedError

    def project(self, states: np.ndarray, k: int, j: np.ndarray) -> np.ndarray:
        """Deterministic part of ``Z_m(t_j)`` for ``j >= k`` given states at ``k``."""
        raise NotImplementedError

    def z_at(self, states: np.ndarray, k: int) -> np.ndarray:
        return self.project(states, k, np.array([k]))[:, 0]

    def states_at(self, dB1: np.ndarray, ks) -> np.ndarray:
        """Factor states at absolute grid indices ``ks`` for paths started at 0."""
        ks = np.asarray(ks, dtype=np.int64)
        _, states = self.simulate(dB1, record=ks)
        return states

    def continue_paths(self, states: np.ndarray, k: int, dB1_tail: np.ndarray) -> np.ndarray:
        """``Z_m`` on grid indices ``k..k+L`` continuing from ``states`` with fresh noise.

        Uses the factor recursion when the state is small and otherwise the
        equivalent projection + convolution, which costs ``O(L^2)``
        instead of ``O(L dim)`` per path.
        """
        n, L = dB1_tail.shape
        if self.dim * 8 < L or L == 0:
            z, _ = self.simulate(dB1_tail, start=states, k0=k)
            return z
        j = np.arange(k, k + L + 1)
        return self.project(states, k, j) + convolve_lags(self.lags, dB1_tail)


class OUFactorModel(FactorModel):
    basis: OUBasis

    @property
    def dim(self) -> int:
        return self.basis.m

    @cached_property
    def decay(self) -> np.ndarray:
        return np.exp(-self.basis.alphas * self.grid.dt)

    def simulate(self, dB1, start=None, k0: int = 0, record=()):
        dB1 = np.ascontiguousarray(np.atleast_2d(dB1), dtype=float)
        n, L = dB1.shape
        m = self.dim
        v0 = np.zeros((n, m)) if start is None else np.ascontiguousarray(np.broadcast_to(start, (n, m)), dtype=float)
        rec = np.asarray(record, dtype=np.int64)
        z = np.empty((n, L + 1))
        states = np.empty((n, rec.size, m))
        _loops.ou_factor_paths(self.basis.sigmas, self.decay, v0, dB1, rec, z, states)
        return z, states

    def project(self, states, k, j):
        lag = (np.asarray(j) - k) * self.grid.dt
        e = np.exp(-np.multiply.outer(lag, self.basis.alphas))  # (J, m)
        return np.atleast_2d(states) @ e.T


class BernsteinFactorModel(FactorModel):
    """Bernstein approximant driven by lag factors in the Bernstein basis.

    The state is ``B_j(t) = sum_{t_l < t} b_{j,m}((t - t_l) / T) dB1_l`` for
    ``j = 0..m`` and ``Z_m(t) = sum_j K(T j / m) B_j(t)``. It carries the same
    information as the power moments ``M_p`` (an invertible linear change of
    variables) but stays accurate to rounding for any degree, while the power
    moments lose digits quickly beyond m = 20.
    """

    basis: BernsteinBasis

    @property
    def dim(self) -> int:
        return self.basis.m + 1

    @cached_property
    def _shift(self):
        return bernstein_shift(self.basis.m, self.grid.N)

    @cached_property
    def lags(self) -> np.ndarray:
        x = np.arange(self.grid.N + 1) / self.grid.N
        return _bernstein_form(self.basis.nodes, 1.0, x)

    def simulate(self, dB1, start=None, k0: int = 0, record=()):
        dB1 = np.ascontiguousarray(np.atleast_2d(dB1), dtype=float)
        n, L = dB1.shape
        d = self.dim
        b0 = np.zeros((n, d)) if start is None else np.ascontiguousarray(np.broadcast_to(start, (n, d)), dtype=float)
        rec = np.asarray(record, dtype=np.int64)
        z = np.empty((n, L + 1))
        states = np.empty((n, rec.size, d))
        S, inject = self._shift
        _loops.bernstein_factor_paths(S, inject, self.basis.nodes, b0, dB1, rec, z, states)
        return z, states

    def project(self, states, k, j):
        j = np.asarray(j)
        states = np.atleast_2d(states)
        steps = int(j.max()) - k
        z, _ = self.simulate(np.zeros((states.shape[0], steps)), start=states, k0=k)
        return z[:, j - k]

    def continue_paths(self, states, k, dB1_tail):
        z, _ = self.simulate(dB1_tail, start=states, k0=k)
        return z


def factor_model(basis: FactorBasis, grid: TimeGrid) -> FactorModel:
    if isinstance(basis, OUBasis):
        return OUFactorModel(basis, grid)
    return BernsteinFactorModel(basis, grid)


def export_paths_csv(path, grid: TimeGrid, columns: dict[str, np.ndarray]) -> None:
    """CSV with a ``t`` column followed by ``columns`` in insertion order."""
    from .io import write_csv

    write_csv(path, {"t": grid.times, **columns})
