"""Separable (degenerate) approximations of difference kernels.

Two families are provided:

* ``OUBasis``: a finite sum of exponentials ``sum_i sigma_i exp(-alpha_i u)``
  obtained by discretising the Laplace measure of a rough Riemann-Liouville
  kernel. Each summand drives one Ornstein-Uhlenbeck factor.
* ``BernsteinBasis``: the Bernstein polynomial of a Hoelder kernel with
  ``K(0) = 0``, stored in monomial form ``sum_i kappa_i u**i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ConfigError
from .kernels import VolterraKernel

MAX_BERNSTEIN_DEGREE = 60


@dataclass(frozen=True, eq=False)
class OUBasis:
    sigmas: np.ndarray
    alphas: np.ndarray
    taus: np.ndarray
    H: float
    T: float
    partition: str = "aje"

    @property
    def m(self) -> int:
        return len(self.sigmas)

    def __post_init__(self):
        if np.any(np.diff(self.taus) <= 0) or self.taus[0] != 0.0:
            raise ValueError("taus must start at 0 and increase strictly")
        if np.any(self.sigmas <= 0):
            raise ValueError("OU weights must be positive")


@dataclass(frozen=True, eq=False)
class BernsteinBasis:
    """Bernstein polynomial of degree ``m`` in monomial form.

    ``kappas[i]`` multiplies ``u**i`` (``u`` in time units);
    ``unit_kappas[i] = kappas[i] * T**i`` are the coefficients in the
    rescaled lag ``u / T`` used by the factor arithmetic.
    """

    kappas: np.ndarray
    unit_kappas: np.ndarray
    nodes: np.ndarray  # K(T j / m), j = 0..m
    T: float
    H: float

    @property
    def m(self) -> int:
        return len(self.kappas) - 1


FactorBasis = Union[OUBasis, BernsteinBasis]


def _aje_taus(H: float, m: int, T: float) -> np.ndarray:
    scale = (math.sqrt(10.0) * (1.0 - 2.0 * H) / (5.0 - 2.0 * H)) ** 0.4
    return scale / T * np.arange(m + 1, dtype=float) * m ** -0.2


def _geometric_taus(m: int, tau_min: float, tau_max: float) -> np.ndarray:
    taus = np.zeros(m + 1)
    if m == 1:
        taus[1] = tau_max
    else:
        taus[1:] = np.geomspace(tau_min, tau_max, m)
    return taus


def ou_discretize(
    H: float,
    m: int,
    T: float = 1.0,
    partition: str = "aje",
    tau_min: float | None = None,
    tau_max: float | None = None,
) -> OUBasis:
    """Sum-of-exponentials approximation of the rough fractional kernel.

    Weights and speeds are the mass and the barycentre of the measure
    ``mu(da) = c_H a**(-H-1/2) da`` on each cell of the partition, computed
    from closed-form power antiderivatives. ``partition="geometric"`` is an
    experimental alternative without a rate guarantee.
    """
    if H >= 0.5:
        raise ValueError(
            f"OU discretisation needs H < 1/2 (got H={H}); "
            "use the Bernstein approximation for Hoelder kernels"
        )
    if H <= 0.0:
        raise ValueError(f"H must be positive, got {H}")
    if m < 1:
        raise ValueError("m must be at least 1")
    if not T > 0:
        raise ValueError("T must be positive")

    if partition == "aje":
        taus = _aje_taus(H, m, T)
    elif partition == "geometric":
        lo = 1e-2 / T if tau_min is None else tau_min
        hi = 10.0 * m / T if tau_max is None else tau_max
        taus = _geometric_taus(m, lo, hi)
    else:
        raise ValueError(f"unknown tau partition {partition!r}")

    c_h = 1.0 / (gamma_fn(H + 0.5) * gamma_fn(0.5 - H))
    p1, p3 = 0.5 - H, 1.5 - H
    lo_t, hi_t = taus[:-1], taus[1:]
    sigmas = c_h * (hi_t**p1 - lo_t**p1) / p1
    alphas = c_h * (hi_t**p3 - lo_t**p3) / p3 / sigmas
    return OUBasis(sigmas, alphas, taus, float(H), float(T), partition)


def bernstein_fit(kernel: VolterraKernel, m: int) -> BernsteinBasis:
    """Bernstein polynomial of ``kernel`` on ``[0, T]`` in monomial form.

    Requires ``K(0) = 0`` so that the constant coefficient vanishes.
    Degrees above 60 are refused: the monomial coefficients grow like
    binomials, and evaluating them in floating point loses precision fast
    (about 1e-9 absolute at m = 30, 1e-4 at m = 45 for ``u**0.4``).
    """
    if kernel.value_at_zero is None or kernel.value_at_zero != 0.0:
        raise ValueError(
            "Bernstein approximation requires a kernel with K(0) = 0 "
            f"(got value_at_zero={kernel.value_at_zero})"
        )
    if m < 1:
        raise ValueError("Bernstein degree must be at least 1")
    if m > MAX_BERNSTEIN_DEGREE:
        raise ValueError(f"Bernstein degree {m} exceeds the supported maximum {MAX_BERNSTEIN_DEGREE}")

    T = kernel.T
    nodes = np.asarray(kernel.eval(T * np.arange(m + 1) / m), dtype=float)
    nodes[0] = 0.0
    # exact rational arithmetic on the (float) node values: one rounding per kappa
    exact = [Fraction(float(v)) for v in nodes]
    unit = np.empty(m + 1)
    for i in range(m + 1):
        acc = sum(
            (-1) ** (i - j) * exact[j] * math.comb(m, j) * math.comb(m - j, i - j)
            for j in range(i + 1)
        )
        unit[i] = float(acc)
    kappas = unit / T ** np.arange(m + 1, dtype=float)
    return BernsteinBasis(kappas, unit, nodes, float(T), kernel.H)


def bernstein_operator(kernel: VolterraKernel, m: int) -> VolterraKernel:
    """The degree-``m`` Bernstein polynomial evaluated in Bernstein form.

    Stable for any degree, so it serves error studies beyond the monomial
    cap of ``bernstein_fit``.
    """
    T = kernel.T
    nodes = np.asarray(kernel.eval(T * np.arange(m + 1) / m), dtype=float)
    if kernel.value_at_zero is not None:
        nodes[0] = kernel.value_at_zero

    def f(u):
        return _bernstein_form(nodes, T, u)

    return VolterraKernel(f, T, kernel.H, float(nodes[0]), name=f"bernstein{m}")


def eval_factor_kernel(basis: FactorBasis, u):
    """Evaluate the separable approximant at lag(s) ``u`` in ``[0, T]``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0) or np.any(u_arr > basis.T * (1.0 + 1e-12)):
        raise ValueError(f"lag outside [0, {basis.T}]")
    if isinstance(basis, OUBasis):
        flat = u_arr.ravel()
        out = np.empty_like(flat)
        step = max(1, (1 << 22) // basis.m)  # bound the (lags x factors) temporary
        for lo in range(0, flat.size, step):
            chunk = flat[lo : lo + step]
            out[lo : lo + step] = np.exp(-np.multiply.outer(chunk, basis.alphas)) @ basis.sigmas
        out = out.reshape(u_arr.shape)
    else:
        # Horner on the monomial coefficients
        out = np.zeros_like(u_arr)
        for k in basis.kappas[::-1]:
            out = out * u_arr + k
    if np.ndim(u) == 0:
        return float(out)
    return out


def _bernstein_form(nodes: np.ndarray, T: float, u):
    m = len(nodes) - 1
    x = np.clip(np.atleast_1d(np.asarray(u, dtype=float)).ravel() / T, 0.0, 1.0)[:, None]
    # de Casteljau: convex combinations only, so no overflow for tiny x at any degree
    b = np.broadcast_to(np.asarray(nodes, dtype=float), (x.shape[0], m + 1))
    for _ in range(m):
        b = (1.0 - x) * b[:, :-1] + x * b[:, 1:]
    return b[:, 0].reshape(np.shape(u))


def as_kernel(basis: FactorBasis) -> VolterraKernel:
    """View a factor basis as an ordinary (finite-at-0) difference kernel.

    Bernstein bases are evaluated in Bernstein form here, which equals
    ``eval_factor_kernel`` mathematically but is accurate to rounding for
    every degree.
    """
    if isinstance(basis, OUBasis):
        v0 = float(np.sum(basis.sigmas))
        return VolterraKernel(
            lambda u: eval_factor_kernel(basis, u), basis.T, basis.H, v0, name=f"ou{basis.m}"
        )
    nodes = basis.nodes
    return VolterraKernel(
        lambda u: _bernstein_form(nodes, basis.T, u), basis.T, basis.H, float(nodes[0]),
        name=f"bernstein{basis.m}",
    )


@lru_cache(maxsize=32)
def bernstein_shift(m: int, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    """Translation by ``h = 1/n_sub`` in the degree-``m`` Bernstein basis on ``[0, 1]``.

    Returns ``(S, b)`` with ``b_j(x + h) = sum_i S[j, i] b_i(x)`` and
    ``b[j] = b_j(h)``. Built in exact rationals, rounded once per entry.
    """
    h = Fraction(1, n_sub)
    S = np.empty((m + 1, m + 1))
    # Bernstein coefficients of x**k: c_i = C(i, k) / C(m, k)
    to_bern = [[Fraction(math.comb(i, k), math.comb(m, k)) for k in range(m + 1)] for i in range(m + 1)]
    hp = [h**e for e in range(m + 1)]
    for j in range(m + 1):
        mono = [Fraction(0)] * (m + 1)
        for r in range(m - j + 1):
            mono[j + r] += (-1) ** r * math.comb(m, j) * math.comb(m - j, r)
        shifted = [Fraction(0)] * (m + 1)
        for k, a in enumerate(mono):
            if a:
                for q in range(k + 1):
                    shifted[q] += a * math.comb(k, q) * hp[k - q]
        for i in range(m + 1):
            S[j, i] = float(sum(shifted[k] * to_bern[i][k] for k in range(i + 1)))
    inject = np.array([float(math.comb(m, j) * hp[j] * (1 - h) ** (m - j)) for j in range(m + 1)])
    return S, inject


def export_basis_csv(basis: FactorBasis, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(basis, OUBasis):
            w.writerow(["i", "sigma", "alpha"])
            for i, (s, a) in enumerate(zip(basis.sigmas, basis.alphas), start=1):
                w.writerow([i, repr(float(s)), repr(float(a))])
        else:
            w.writerow(["i", "kappa"])
            for i, k in enumerate(basis.kappas):
                w.writerow([i, repr(float(k))])
    return path


def approx_from_config(cfg: dict[str, Any], kernel: VolterraKernel) -> FactorBasis:
    """``{scheme = "ou", m = 1000}`` or ``{scheme = "bernstein", m = 30}``."""
    scheme = cfg.get("scheme")
    if "m" not in cfg:
        raise ConfigError("approx.m: missing")
    m = int(cfg["m"])
    try:
        if scheme == "ou":
            if kernel.name != "fractional":
                raise ConfigError("approx.scheme: 'ou' needs a fractional kernel")
            return ou_discretize(
                kernel.H, m, kernel.T, cfg.get("partition", "aje"),
                cfg.get("tau_min"), cfg.get("tau_max"),
            )
        if scheme == "bernstein":
            return bernstein_fit(kernel, m)
    except ValueError as exc:
        raise ConfigError(f"approx: {exc}") from None
    raise ConfigError(f"approx.scheme: unknown scheme {scheme!r}")


def basis_summary(basis: FactorBasis) -> dict[str, Any]:
    kind = "ou" if isinstance(basis, OUBasis) else "bernstein"
    return {"scheme": kind, "m": basis.m}


__all__ = [
    "OUBasis",
    "BernsteinBasis",
    "FactorBasis",
    "ou_discretize",
    "bernstein_fit",
    "bernstein_operator",
    "eval_factor_kernel",
    "as_kernel",
    "bernstein_shift",
    "export_basis_csv",
    "approx_from_config",
    "MAX_BERNSTEIN_DEGREE",
]
