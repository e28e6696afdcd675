"""Experiment runner: assumption checks, studies, presets and run reports."""

from __future__ import annotations

import hashlib
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from ._accel import backend
from .approx import as_kernel, bernstein_fit, bernstein_operator, ou_discretize
from .config import ExperimentConfig, normalise
from .errors import AssumptionError, ConfigError
from .hedging import (
    HedgeEstimate,
    hedge_objective,
    lsmc_fit,
    lsmc_hedge,
    nmc_hedge_path,
    partition_indices,
    payoff_from_config,
    state_inputs,
)
from .io import write_csv, write_json, write_rows
from .kernels import VolterraKernel, kernel_from_config, kernel_l2_distance
from .market import MarketSpec, simulate_joint, simulate_paths
from .noise import TimeGrid, uniform_grid
from .parallel import map_blocks
from .volatility import as_profile, sandwich_from_config

# --------------------------------------------------------------------------
# assumption checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def model_checks(
    sandwich: dict[str, Any] | None,
    kernel: VolterraKernel | None,
    approx_scheme: str | None,
    rho: float | None,
    payoff: dict[str, Any] | None,
    T: float,
    N: int,
) -> list[Check]:
    checks: list[Check] = []
    times = T * np.arange(N + 1) / N
    if sandwich is not None:
        phi, psi = as_profile(sandwich["phi"]), as_profile(sandwich["psi"])
        lo, hi = phi(times), psi(times)
        ok = bool(np.all(lo < hi))
        checks.append(Check("phi < psi", ok, "on every grid time" if ok else
                            f"fails at t = {times[np.argmax(lo >= hi)]}"))
        y0 = float(sandwich["y0"])
        checks.append(Check("phi(0) < Y(0) < psi(0)", bool(phi(0.0) < y0 < psi(0.0)),
                            f"{phi(0.0)} < {y0} < {psi(0.0)}"))
        gamma, c = float(sandwich["gamma"]), float(sandwich["c"])
        if kernel is not None:
            H = kernel.H
            need = 1.0 / H - 1.0
            if c == 0:
                checks.append(Check("gamma > 1/H - 1", True, "not applicable: c = 0 (no singular drift)"))
            else:
                checks.append(Check("gamma > 1/H - 1", gamma > need, f"gamma = {gamma}, 1/H - 1 = {need:.6g}"))
        c3 = float(sandwich.get("c3", 1.0))
        dt = T / N
        checks.append(Check("dt * c3 < 1", dt * c3 < 1.0, f"dt * c3 = {dt * c3:.6g}"))
    if approx_scheme == "bernstein" and kernel is not None:
        v0 = kernel.value_at_zero
        checks.append(Check("K(0) = 0 for Bernstein", v0 == 0.0, f"K(0) = {v0}"))
    if approx_scheme == "ou" and kernel is not None:
        ok = kernel.name == "fractional" and kernel.H < 0.5
        checks.append(Check("OU needs a rough fractional kernel", ok, f"{kernel.name}, H = {kernel.H}"))
    if rho is not None:
        checks.append(Check("|rho| < 1", abs(rho) < 1.0, f"rho = {rho}"))
    if payoff is not None and payoff.get("type") == "call":
        k = float(payoff["strike"])
        checks.append(Check("strike > 0", k > 0, f"strike = {k}"))
    return checks


def validate_model(config: dict[str, Any] | ExperimentConfig) -> list[Check]:
    """Pass/fail per model assumption; reports, never raises on a failed check."""
    cfg = config.raw if isinstance(config, ExperimentConfig) else config
    grid = cfg.get("grid", {})
    T, N = float(grid.get("T", 1.0)), int(grid.get("N", 512))
    kernel = kernel_from_config(cfg["kernel"], T) if "kernel" in cfg else None
    scheme = cfg.get("approx", {}).get("scheme")
    rho = float(cfg["market"]["rho"]) if "market" in cfg else None
    return model_checks(cfg.get("sandwich"), kernel, scheme, rho, cfg.get("payoff"), T, N)


def _raise_failed(checks: list[Check]) -> None:
    bad = [c for c in checks if not c.passed]
    if bad:
        raise AssumptionError("; ".join(f"assumption '{c.name}' violated ({c.detail})" for c in bad))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def versions() -> dict[str, str]:
    import scipy

    from ._accel import numba

    return {
        "svv": __version__, "python": platform.python_version(), "numpy": np.__version__,
        "scipy": scipy.__version__, "numba": getattr(numba, "__version__", "absent"), "backend": backend(),
    }


@dataclass
class RunReport:
    config: dict[str, Any]
    results: dict[str, Any] = field(default_factory=dict)
    manifest: list[dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0
    versions: dict[str, str] = field(default_factory=versions)
    out_dir: Path | None = None

    def add_file(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.manifest.append({"file": path.name, "sha256": digest})

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config, "results": self.results, "manifest": self.manifest,
            "wall_time": self.wall_time, "versions": self.versions,
        }

    def finish(self, t0: float) -> Path:
        self.wall_time = time.perf_counter() - t0
        self.manifest.sort(key=lambda e: e["file"])
        self.manifest.append({"file": "report.json", "sha256": None})
        return write_json(self.out_dir / "report.json", self.to_dict())


class _Writer:
    """Writes into the output dir and records every file in the report."""

    def __init__(self, report: RunReport, formats):
        self.report = report
        self.formats = formats

    def csv(self, name: str, columns) -> None:
        if "csv" in self.formats:
            self.report.add_file(write_csv(self.report.out_dir / name, columns))

    def rows(self, name: str, header, rows) -> None:
        if "csv" in self.formats:
            self.report.add_file(write_rows(self.report.out_dir / name, header, rows))

    def json(self, name: str, obj) -> None:
        if "json" in self.formats:
            self.report.add_file(write_json(self.report.out_dir / name, obj))


# --------------------------------------------------------------------------
# model assembly
# --------------------------------------------------------------------------


def build_basis(scheme: str, kernel: VolterraKernel, m: int, cfg_approx: dict[str, Any] | None = None):
    cfg_approx = cfg_approx or {}
    try:
        if scheme == "ou":
            return ou_discretize(kernel.H, m, kernel.T, cfg_approx.get("partition", "aje"),
                                 cfg_approx.get("tau_min"), cfg_approx.get("tau_max"))
        return bernstein_fit(kernel, m)
    except ValueError as exc:
        raise ConfigError(f"approx: {exc}") from None


def build_market(cfg: dict[str, Any], T: float, m: int | None = None) -> MarketSpec:
    kernel = kernel_from_config(cfg["kernel"], T)
    approx = None
    if "approx" in cfg:
        ap = cfg["approx"]
        mm = m if m is not None else ap.get("m")
        if mm is not None:
            approx = build_basis(ap["scheme"], kernel, int(mm), ap)
    mk = cfg["market"]
    return MarketSpec(float(mk["x0"]), float(mk["rho"]), sandwich_from_config(cfg["sandwich"]),
                      kernel, approx, float(mk.get("nu", 0.0)))


def log_log_slope(ms, errors) -> float | None:
    """Least-squares slope of ``log error`` on ``log m``; ``None`` if any error is 0."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2 or np.any(e <= 0) or not np.all(np.isfinite(e)):
        return None
    return float(np.polyfit(np.log(np.asarray(ms, dtype=float)), np.log(e), 1)[0])


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------


def kernel_errors(kernel: VolterraKernel, scheme: str, ms, n_quad: int | None = None) -> list[dict[str, Any]]:
    """L2 and sup errors of the approximants on a fixed evaluation grid."""
    u = kernel.T * np.arange(1, 1001) / 1000
    ref = kernel.eval(u)
    rows = []
    for m in ms:
        if scheme == "ou":
            approx = as_kernel(ou_discretize(kernel.H, int(m), kernel.T))
        else:
            # Bernstein form: same polynomial as bernstein_fit, valid beyond the monomial cap
            approx = bernstein_operator(kernel, int(m))
        kw = {} if n_quad is None else {"n_quad": n_quad}
        l2 = kernel_l2_distance(kernel, approx, **kw)
        sup = float(np.max(np.abs(ref - approx.eval(u))))
        rows.append({"m": int(m), "l2_error": l2, "sup_error": sup,
                     "error": sup if scheme == "bernstein" else l2})
    return rows


def model_errors(cfg: dict[str, Any], grid: TimeGrid, ms, n_paths: int, seed: int,
                 workers: int | None = None) -> dict[str, list[dict[str, Any]]]:
    """Mean ``sup_k |Y - Y_m|`` and ``sup_k |X - X_m|**2`` against the direct convolution."""
    base = build_market(cfg, grid.T)
    specs = [build_market(cfg, grid.T, int(m)) for m in ms]

    def work(lo, hi):
        idx = np.arange(lo, hi)
        ref = simulate_paths(base.with_approx(None), grid, seed, idx, False, keep_increments=False)
        ey, ex = [], []
        for sp in specs:
            jp = simulate_paths(sp, grid, seed, idx, True, keep_increments=False)
            ey.append(np.max(np.abs(ref.y - jp.y), axis=1))
            ex.append(np.max((ref.x - jp.x) ** 2, axis=1))
        return np.array(ey), np.array(ex)

    parts = map_blocks(work, n_paths, workers)
    ey = np.concatenate([p[0] for p in parts], axis=1)
    ex = np.concatenate([p[1] for p in parts], axis=1)
    out: dict[str, list[dict[str, Any]]] = {"vol": [], "price": []}
    for i, m in enumerate(ms):
        for key, arr in (("vol", ey[i]), ("price", ex[i])):
            out[key].append({"m": int(m), "error": float(arr.mean()),
                             "se": float(arr.std(ddof=1) / math.sqrt(n_paths))})
    return out


def hedge_errors(cfg: dict[str, Any], grid: TimeGrid, ms, m_ref: int, payoff, n_inner: int,
                 seed: int, path_index: int, partition_n: int, workers: int | None = None):
    """Mean ``|u^m - u^ref|`` over the partition, common outer increments and inner seeds."""
    hedges = {}
    for m in list(ms) + [m_ref]:
        if m in hedges:
            continue
        sp = build_market(cfg, grid.T, int(m))
        jp = simulate_joint(sp, grid, seed, path_index, True)
        hedges[m] = nmc_hedge_path(sp, jp, grid, partition_n, payoff, n_inner, seed, workers)
    ref = hedges[m_ref]
    rows = []
    for m in ms:
        h = hedges[m]
        d = np.abs(h.values - ref.values)
        se = math.sqrt(float(np.sum(h.standard_errors**2 + ref.standard_errors**2))) / d.size
        rows.append({"m": int(m), "error": float(d.mean()), "se": se})
    return rows, hedges


def convergence_study(config: dict[str, Any] | ExperimentConfig, workers: int | None = None) -> dict[str, Any]:
    """Error table over ``approx.m_values`` plus the fitted log-log slope."""
    ec = config if isinstance(config, ExperimentConfig) else normalise(config)
    cfg = ec.raw
    ms = [int(m) for m in cfg["approx"]["m_values"]]
    if len(ms) < 3:
        raise ConfigError("approx.m_values: a convergence study needs at least 3 values")
    run = ec.run
    quantity = run["quantity"]
    w = run["workers"] if workers is None else workers
    if quantity == "kernel":
        rows = kernel_errors(kernel_from_config(cfg["kernel"], ec.T), cfg["approx"]["scheme"], ms)
        table = [{"m": r["m"], "error": r["error"], "se": 0.0} for r in rows]
    elif quantity in ("vol", "price"):
        grid = uniform_grid(ec.T, ec.N)
        table = model_errors(cfg, grid, ms, run["n_paths"], run["master_seed"], w)[quantity]
    elif quantity == "hedge":
        grid = uniform_grid(ec.T, ec.N)
        m_ref = int(cfg["approx"].get("m_ref", max(ms)))
        table, _ = hedge_errors(cfg, grid, ms, m_ref, payoff_from_config(cfg["payoff"]), run["n_inner"],
                                run["master_seed"], run["path_index"], run["partition_n"], w)
    else:
        raise ConfigError(f"run.quantity: unknown quantity {quantity!r}")
    slope = log_log_slope([r["m"] for r in table], [r["error"] for r in table])
    return {"quantity": quantity, "table": table, "slope": slope, "degenerate": slope is None}


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def _hedge_columns(h: HedgeEstimate) -> dict[str, Any]:
    return {"t": h.times[:-1], "u": h.values, "se": h.standard_errors}


def run(config: dict[str, Any] | ExperimentConfig, paper_scale: bool = False, workers: int | None = None,
        out_dir: str | Path | None = None) -> RunReport:
    """Validate, execute the requested study and write CSV/JSON artifacts plus ``report.json``."""
    t0 = time.perf_counter()
    ec = config if isinstance(config, ExperimentConfig) else normalise(
        config, paper_scale, workers, None if out_dir is None else str(out_dir))
    cfg, run_cfg = ec.raw, ec.run
    if ec.kind not in ("kernel-error", "convergence") or run_cfg["quantity"] != "kernel":
        _raise_failed(validate_model(ec))
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(config=cfg, out_dir=out)
    wr = _Writer(report, cfg["output"]["formats"])
    w = run_cfg["workers"]
    seed = run_cfg["master_seed"]
    kind = ec.kind
    grid = uniform_grid(ec.T, ec.N)

    if kind == "simulate":
        spec = build_market(cfg, ec.T)
        use_approx = bool(run_cfg["use_approx"]) and spec.approx is not None
        n = run_cfg["n_paths"]

        def work(lo, hi):
            jp = simulate_paths(spec, grid, seed, np.arange(lo, hi), use_approx)
            return jp.z, jp.y, jp.x

        parts = map_blocks(work, n, w)
        z = np.concatenate([p[0] for p in parts])
        y = np.concatenate([p[1] for p in parts])
        x = np.concatenate([p[2] for p in parts])
        from .volatility import sandwich_violations

        viol = sandwich_violations(spec.sandwich, grid.times, y)
        wr.csv("paths_summary.csv", {
            "t": grid.times, "mean_Z": z.mean(0), "mean_Y": y.mean(0), "min_Y": y.min(0),
            "max_Y": y.max(0), "mean_X": x.mean(0), "sd_X": x.std(0, ddof=1) if n > 1 else np.zeros(grid.N + 1),
        })
        for i in range(min(n, run_cfg["n_export"])):
            wr.csv(f"path_{i}.csv", {"t": grid.times, "Z": z[i], "Y": y[i], "X": x[i]})
        report.results = {"n_paths": n, "sandwich_violations": viol, "use_approx": use_approx,
                          "mean_X_T": float(x[:, -1].mean())}

    elif kind == "kernel-error":
        kernel = kernel_from_config(cfg["kernel"], ec.T)
        rows = kernel_errors(kernel, cfg["approx"]["scheme"], cfg["approx"]["m_values"])
        wr.rows("kernel_error.csv", ["m", "l2_error", "sup_error"],
                [(r["m"], r["l2_error"], r["sup_error"]) for r in rows])
        report.results = {"table": rows, "slope": log_log_slope([r["m"] for r in rows], [r["error"] for r in rows])}

    elif kind in ("vol-error", "price-error"):
        key = "vol" if kind == "vol-error" else "price"
        table = model_errors(cfg, grid, cfg["approx"]["m_values"], run_cfg["n_paths"], seed, w)[key]
        wr.rows(f"{key}_error.csv", ["m", "error", "se"], [(r["m"], r["error"], r["se"]) for r in table])
        report.results = {"table": table}

    elif kind == "convergence":
        res = convergence_study(ec, w)
        wr.rows(f"convergence_{res['quantity']}.csv", ["m", "error", "se"],
                [(r["m"], r["error"], r["se"]) for r in res["table"]])
        report.results = res

    elif kind in ("hedge-nmc", "hedge-lsmc", "objective"):
        spec = build_market(cfg, ec.T)
        payoff = payoff_from_config(cfg["payoff"])
        partition = run_cfg["partition_n"]
        partition_indices(grid, partition)
        jp = simulate_joint(spec, grid, seed, run_cfg["path_index"], True)
        if kind == "hedge-nmc":
            h = nmc_hedge_path(spec, jp, grid, partition, payoff, run_cfg["n_inner"], seed, w)
            wr.csv("hedge_nmc.csv", _hedge_columns(h))
            wr.json("hedge_nmc.json", h.to_dict())
            wr.csv("reference_path.csv", {"t": grid.times, "Z": jp.z, "Y": jp.y, "X": jp.x})
            report.results = {"u": h.values.tolist(), "se": h.standard_errors.tolist()}
        elif kind == "hedge-lsmc":
            model = lsmc_fit(spec, grid, partition, payoff, run_cfg["n_outer"], run_cfg["degree"],
                             run_cfg["ridge"], seed, w)
            h = lsmc_hedge(model, jp, grid, partition)
            wr.csv("hedge_lsmc.csv", _hedge_columns(h))
            wr.json("regression_model.json", model.to_dict())
            wr.csv("reference_path.csv", {"t": grid.times, "Z": jp.z, "Y": jp.y, "X": jp.x})
            report.results = {"u": h.values.tolist()}
        else:
            strategy = run_cfg["strategy"]
            n_eval = run_cfg["n_eval"]
            j0, se0 = hedge_objective(spec, grid, np.zeros(partition), payoff, n_eval, seed,
                                      partition=partition, workers=w)
            if strategy == "zero":
                j, se = j0, se0
            elif strategy == "lsmc":
                model = lsmc_fit(spec, grid, partition, payoff, run_cfg["n_outer"], run_cfg["degree"],
                                 run_cfg["ridge"], seed, w)
                j, se = hedge_objective(spec, grid, model, payoff, n_eval, seed, mode="adapted",
                                        partition=partition, workers=w)
            elif strategy == "nmc":
                h = nmc_hedge_path(spec, jp, grid, partition, payoff, run_cfg["n_inner"], seed, w)
                j, se = hedge_objective(spec, grid, h, payoff, n_eval, seed, workers=w)
            else:
                raise ConfigError(f"run.strategy: unknown strategy {strategy!r}")
            wr.rows("objective.csv", ["strategy", "J", "se"], [("zero", j0, se0), (strategy, j, se)])
            report.results = {"J": j, "se": se, "J_zero": j0, "se_zero": se0, "strategy": strategy}
    else:  # pragma: no cover - normalise rejects unknown kinds
        raise ConfigError(f"run.kind: {kind!r}")

    report.finish(t0)
    return report


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def _example_51_cfg() -> dict[str, Any]:
    return {
        "grid": {"N": 500, "T": 1.0},
        "market": {"x0": 5.0, "rho": 0.5, "nu": 0.0},
        "sandwich": {"phi": 0.01, "psi": 5.0, "gamma": 4.0, "c": 1.0, "y0": 1.0},
        "kernel": {"type": "power", "exponent": 0.4},
        "approx": {"scheme": "bernstein", "m": 10},
        "payoff": {"type": "call", "strike": 4.0},
        "run": {"kind": "hedge-nmc", "master_seed": 20240501, "partition_n": 10},
    }


def _example_52_cfg() -> dict[str, Any]:
    cfg = _example_51_cfg()
    cfg["kernel"] = {"type": "fractional", "H": 0.3}
    cfg["approx"] = {"scheme": "ou", "m": 10}
    return cfg


PRESETS = {
    "example-5.1": ("Hoelder kernel u^0.4 with Bernstein m in {10, 30}", _example_51_cfg, [10, 30]),
    "example-5.2": ("rough fractional kernel H = 0.3 with OU m in {10, 100, 1000, 2000}", _example_52_cfg,
                    [10, 100, 1000, 2000]),
    "example-5.3": ("LSMC (degree-2 polynomial) against NMC for Bernstein m = 10", _example_51_cfg, [10]),
}


def preset_config(name: str) -> dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})")
    return PRESETS[name][1]()


def run_preset(name: str, paper_scale: bool = False, workers: int | None = None,
               out_dir: str | Path | None = None) -> RunReport:
    t0 = time.perf_counter()
    cfg = preset_config(name)
    ec = normalise(cfg, paper_scale, workers, None if out_dir is None else str(out_dir))
    cfg, run_cfg = ec.raw, ec.run
    _raise_failed(validate_model(ec))
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(config={"preset": name, **cfg}, out_dir=out)
    wr = _Writer(report, cfg["output"]["formats"])
    w, seed = run_cfg["workers"], run_cfg["master_seed"]
    ms = PRESETS[name][2]
    grid = uniform_grid(ec.T, ec.N)
    payoff = payoff_from_config(cfg["payoff"])
    kernel = kernel_from_config(cfg["kernel"], ec.T)
    scheme = cfg["approx"]["scheme"]

    if name in ("example-5.1", "example-5.2"):
        plot_ms = [m for m in ms if m <= 1000]
        u = ec.T * np.arange(1, 1001) / 1000
        cols = {"u": u, "K": kernel.eval(u)}
        for m in plot_ms:
            cols[f"K_m{m}"] = as_kernel(build_basis(scheme, kernel, m)).eval(u)
        wr.csv("kernels.csv", cols)

        base = build_market(cfg, ec.T)
        ref = simulate_joint(base.with_approx(None), grid, seed, run_cfg["path_index"], False)
        cols = {"t": grid.times, "Z": ref.z, "Y": ref.y, "X": ref.x}
        for m in plot_ms:
            jp = simulate_joint(build_market(cfg, ec.T, m), grid, seed, run_cfg["path_index"], True)
            cols.update({f"Z_m{m}": jp.z, f"Y_m{m}": jp.y, f"X_m{m}": jp.x})
        wr.csv("paths.csv", cols)

        hedges = {}
        for m in ms:
            sp = build_market(cfg, ec.T, m)
            jp = simulate_joint(sp, grid, seed, run_cfg["path_index"], True)
            hedges[m] = nmc_hedge_path(sp, jp, grid, run_cfg["partition_n"], payoff, run_cfg["n_inner"], seed, w)
        cols = {"t": grid.times[partition_indices(grid, run_cfg["partition_n"])][:-1]}
        for m, h in hedges.items():
            cols[f"u_m{m}"] = h.values
            cols[f"se_m{m}"] = h.standard_errors
        wr.csv("hedge_nmc.csv", cols)
        report.results = {"hedges": {str(m): h.values.tolist() for m, h in hedges.items()},
                          "n_inner": run_cfg["n_inner"]}
    else:
        sp = build_market(cfg, ec.T, 10)
        jp = simulate_joint(sp, grid, seed, run_cfg["path_index"], True)
        nmc = nmc_hedge_path(sp, jp, grid, run_cfg["partition_n"], payoff, run_cfg["n_inner"], seed, w)
        model = lsmc_fit(sp, grid, run_cfg["partition_n"], payoff, run_cfg["n_outer"], run_cfg["degree"],
                         run_cfg["ridge"], seed, w)
        # lsmc_hedge refuses states where the fitted denominator is not positive;
        # the preset records those as NaN so the rest of the comparison survives
        idx = partition_indices(grid, run_cfg["partition_n"])
        u_ls, bad = np.full(idx.size - 1, np.nan), []
        for j in range(idx.size - 1):
            x, y, f = jp.state(int(idx[j]))
            n_, d_ = model.predict(j, state_inputs(x, y, f))
            if d_[0] > 0:
                u_ls[j] = n_[0] / d_[0]
            else:
                bad.append(float(grid.times[idx[j]]))
        wr.csv("hedge_lsmc.csv", {"t": nmc.times[:-1], "u_nmc": nmc.values, "se_nmc": nmc.standard_errors,
                                  "u_lsmc": u_ls})
        wr.json("regression_model.json", model.to_dict())
        report.results = {"u_nmc": nmc.values.tolist(), "u_lsmc": u_ls.tolist(), "nonpositive_den_at": bad,
                          "n_inner": run_cfg["n_inner"], "n_outer": run_cfg["n_outer"]}
    report.finish(t0)
    return report
