"""Sandwiched volatility: drift family and the drift-implicit Euler scheme.

The canonical drift is

    b(t, y) = c / (y - phi(t))**gamma - c / (psi(t) - y)**gamma + extra(t, y),

which pushes ``Y`` away from both bounds. Each step solves
``y - dt b(t_next, y) = y_prev + dz`` by bisection inside the open sandwich
at the new time, so every simulated value stays strictly between the bounds.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import _loops
from .errors import AssumptionError, ConfigError, NumericalError

TOL_REL = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class Profile:
    """Deterministic bound ``t -> value``; ``kind`` is constant, linear or exp."""

    kind: str
    a: float
    b: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full(t.shape, self.a)
        elif self.kind == "linear":
            out = self.a + self.b * t
        elif self.kind == "exp":
            out = self.a * np.exp(self.b * t)
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        return float(out) if out.ndim == 0 else out

    def extrema(self, T: float) -> tuple[float, float]:
        # all supported profiles are monotone, so the ends suffice
        v0, v1 = float(self(0.0)), float(self(T))
        return min(v0, v1), max(v0, v1)

    def to_config(self):
        if self.kind == "constant":
            return self.a
        return {"type": self.kind, "a": self.a, "b": self.b}


def as_profile(v) -> Profile:
    if isinstance(v, Profile):
        return v
    if isinstance(v, (int, float)):
        return Profile("constant", float(v))
    if isinstance(v, dict):
        try:
            return Profile(str(v["type"]), float(v["a"]), float(v.get("b", 0.0)))
        except KeyError as exc:
            raise ConfigError(f"profile: missing key {exc.args[0]!r}") from None
    raise ConfigError(f"cannot interpret {v!r} as a bound profile")


@dataclass(frozen=True, eq=False)
class SandwichSpec:
    phi: Profile
    psi: Profile
    gamma: float
    c: float
    y0: float
    c3: float = 1.0
    extra_drift: Callable[[Any, Any], Any] | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", as_profile(self.phi))
        object.__setattr__(self, "psi", as_profile(self.psi))
        if self.c < 0:
            raise AssumptionError(f"drift strength c must be non-negative, got {self.c}")
        if not self.gamma > 0:
            raise AssumptionError(f"gamma must be positive, got {self.gamma}")
        if not self.c3 > 0:
            raise AssumptionError(f"c3 must be positive, got {self.c3}")
        if not self.phi(0.0) < self.y0 < self.psi(0.0):
            raise AssumptionError(
                f"Y(0) = {self.y0} is not inside ({self.phi(0.0)}, {self.psi(0.0)})"
            )

    def check_bounds(self, times) -> None:
        lo, hi = self.phi(times), self.psi(times)
        if np.any(lo >= hi):
            t_bad = float(np.asarray(times)[np.argmax(lo >= hi)])
            raise AssumptionError(f"phi < psi fails at t = {t_bad}")

    def check_step(self, dt: float) -> None:
        if not dt * self.c3 < 1.0:
            raise AssumptionError(f"step condition dt * c3 < 1 fails: {dt} * {self.c3} = {dt * self.c3}")

    def to_config(self) -> dict[str, Any]:
        if self.extra_drift is not None:
            raise ConfigError("a sandwich with extra_drift has no config representation")
        return {
            "phi": self.phi.to_config(), "psi": self.psi.to_config(),
            "gamma": self.gamma, "c": self.c, "y0": self.y0, "c3": self.c3,
        }


def paper_sandwich(y0: float = 1.0) -> SandwichSpec:
    """Bounds (0.01, 5) with ``b = 1/(y - 0.01)**4 - 1/(5 - y)**4``."""
    return SandwichSpec(0.01, 5.0, gamma=4.0, c=1.0, y0=y0)


def sandwich_from_config(cfg: dict[str, Any]) -> SandwichSpec:
    missing = [k for k in ("phi", "psi", "gamma", "c", "y0") if k not in cfg]
    if missing:
        raise ConfigError(f"sandwich.{missing[0]}: missing")
    return SandwichSpec(
        as_profile(cfg["phi"]), as_profile(cfg["psi"]), float(cfg["gamma"]), float(cfg["c"]),
        float(cfg["y0"]), float(cfg.get("c3", 1.0)),
    )


def drift_eval(spec: SandwichSpec, t, y):
    t_arr, y_arr = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    lo, hi = spec.phi(t_arr), spec.psi(t_arr)
    if np.any(y_arr <= lo) or np.any(y_arr >= hi):
        raise ValueError(f"y = {y} is outside the open sandwich at t = {t}")
    out = spec.c / (y_arr - lo) ** spec.gamma - spec.c / (hi - y_arr) ** spec.gamma
    if spec.extra_drift is not None:
        out = out + spec.extra_drift(t_arr, y_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class VolPath:
    times: np.ndarray
    values: np.ndarray  # (N + 1,) or (n_paths, N + 1)


def sandwich_violations(spec: SandwichSpec, times, values) -> int:
    lo, hi = spec.phi(times), spec.psi(times)
    v = np.atleast_2d(values)
    return int(np.count_nonzero(~((v > lo) & (v < hi))))


def _solve(spec: SandwichSpec, y_start, z, times, tol_rel: float) -> np.ndarray:
    """Core scheme on ``z`` of shape ``(n, L + 1)`` over ``times`` (``L + 1`` points)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n, L1 = z.shape
    times = np.asarray(times, dtype=float)
    if times.shape != (L1,):
        raise ValueError(f"z has {L1} columns but the time grid has {times.size} points")
    dt = np.diff(times)
    if dt.size:
        spec.check_step(float(dt.max()))
    phi = np.ascontiguousarray(np.broadcast_to(spec.phi(times), (L1,)), dtype=float)
    psi = np.ascontiguousarray(np.broadcast_to(spec.psi(times), (L1,)), dtype=float)
    if np.any(phi >= psi):
        spec.check_bounds(times)
    y_start = np.ascontiguousarray(np.broadcast_to(np.asarray(y_start, dtype=float), (n,)))
    dz = np.ascontiguousarray(np.diff(z, axis=1))
    y = np.empty((n, L1))
    status = np.zeros(n, dtype=np.int64)
    if spec.extra_drift is None:
        _loops.implicit_euler_paths(
            y_start, dz, phi, psi, float(spec.c), float(spec.gamma), dt, tol_rel, MAX_ITER, y, status
        )
    else:
        _loops.implicit_euler_paths_np(
            y_start, dz, phi, psi, float(spec.c), float(spec.gamma), dt, tol_rel, MAX_ITER, y, status,
            extra=spec.extra_drift, times=times,
        )
    if np.any(status != _loops.OK):
        p = int(np.argmax(status != _loops.OK))
        what = "no sign change in the bisection bracket" if status[p] == _loops.NO_BRACKET else (
            "explicit step (c = 0) left the sandwich"
        )
        raise NumericalError(f"implicit Euler failed on path {p}: {what}")
    return y


def implicit_step(spec: SandwichSpec, t_next: float, y_prev: float, dz: float, dt: float, tol=None) -> float:
    """Root of ``y - dt b(t_next, y) = y_prev + dz`` in the open sandwich at ``t_next``.

    ``tol`` is absolute; the default is ``1e-12 * (psi - phi)`` at ``t_next``.
    """
    width = spec.psi(t_next) - spec.phi(t_next)
    tol_rel = TOL_REL if tol is None else float(tol) / width
    y = _solve(spec, [y_prev], [[0.0, dz]], [t_next - dt, t_next], tol_rel)
    return float(y[0, 1])


def simulate_vol(spec: SandwichSpec, z_path, grid, y_start=None) -> VolPath:
    """Drift-implicit Euler on ``grid`` driven by ``z_path`` (one path or a batch)."""
    z = np.asarray(z_path, dtype=float)
    y0 = spec.y0 if y_start is None else y_start
    y = _solve(spec, y0, z, grid.times, TOL_REL)
    return VolPath(grid.times, y[0] if z.ndim == 1 else y)


def vol_continue(spec: SandwichSpec, y_start, z, times) -> np.ndarray:
    """Scheme from ``y_start`` at ``times[0]``; ``z`` includes the starting column."""
    return _solve(spec, y_start, z, times, TOL_REL)


def rest_point(spec: SandwichSpec, t: float = 0.0) -> float:
    """Zero of the canonical drift (the midpoint when ``extra_drift`` is absent)."""
    lo, hi = spec.phi(t), spec.psi(t)
    if spec.extra_drift is None:
        return 0.5 * (lo + hi)
    from scipy.optimize import brentq

    d = 8 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi))
    return float(brentq(lambda y: drift_eval(spec, t, y), lo + d, hi - d, xtol=1e-14))


def hoelder_gamma_ok(gamma: float, H: float) -> bool:
    """``gamma > 1/H - 1``."""
    return gamma > 1.0 / H - 1.0 if H > 0 else False


def bound_extrema(spec: SandwichSpec, T: float) -> tuple[float, float]:
    """``(min phi, max psi)`` over ``[0, T]``."""
    return spec.phi.extrema(T)[0], spec.psi.extrema(T)[1]


__all__ = [
    "Profile",
    "SandwichSpec",
    "VolPath",
    "paper_sandwich",
    "sandwich_from_config",
    "drift_eval",
    "implicit_step",
    "simulate_vol",
    "vol_continue",
    "sandwich_violations",
    "rest_point",
    "hoelder_gamma_ok",
    "bound_extrema",
]
