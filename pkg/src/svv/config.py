"""Experiment configuration: loading (TOML or JSON), schema checks and model assembly."""

from __future__ import annotations

import copy
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

KINDS = (
    "simulate", "kernel-error", "vol-error", "price-error", "hedge-nmc", "hedge-lsmc",
    "objective", "convergence",
)

# sections each kind needs besides grid and run
NEEDS = {
    "simulate": ("market", "sandwich", "kernel"),
    "kernel-error": ("kernel", "approx"),
    "vol-error": ("market", "sandwich", "kernel", "approx"),
    "price-error": ("market", "sandwich", "kernel", "approx"),
    "hedge-nmc": ("market", "sandwich", "kernel", "approx", "payoff"),
    "hedge-lsmc": ("market", "sandwich", "kernel", "approx", "payoff"),
    "objective": ("market", "sandwich", "kernel", "approx", "payoff"),
    "convergence": ("kernel", "approx"),
}

SECTIONS = ("grid", "market", "sandwich", "kernel", "approx", "payoff", "run", "output")

RUN_DEFAULTS: dict[str, Any] = {
    "n_paths": 1000,
    "n_inner": 10_000,
    "n_outer": 100_000,
    "partition_n": 10,
    "degree": 2,
    "ridge": 1e-8,
    "path_index": 0,
    "use_approx": True,
    "n_export": 5,
    "quantity": "kernel",
    "strategy": "lsmc",
    "n_eval": 10_000,
}

PAPER_SCALE = {"n_inner": 100_000, "n_outer": 1_000_000}


def load_config(path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    return d[key]


def _pos_int(v, where: str, allow_zero: bool = False) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < (0 if allow_zero else 1):
        want = "a non-negative integer" if allow_zero else "a positive integer"
        raise ConfigError(f"{where}: must be {want} (got {v!r})")
    return v


def _real(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}: must be a finite number (got {v!r})")
    return float(v)


@dataclass
class ExperimentConfig:
    raw: dict[str, Any]

    @property
    def run(self) -> dict[str, Any]:
        return self.raw["run"]

    @property
    def kind(self) -> str:
        return self.raw["run"]["kind"]

    @property
    def T(self) -> float:
        return float(self.raw["grid"]["T"])

    @property
    def N(self) -> int:
        return int(self.raw["grid"]["N"])


def normalise(cfg: dict[str, Any], paper_scale: bool = False, workers: int | None = None,
              out_dir: str | None = None) -> ExperimentConfig:
    """Check structure and fill run defaults; never touches the file system."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a table")
    cfg = copy.deepcopy(cfg)
    for key in cfg:
        if key not in SECTIONS:
            raise ConfigError(f"{key}: unknown section (expected one of {', '.join(SECTIONS)})")
    run = _need(cfg, "run", "config")
    if not isinstance(run, dict):
        raise ConfigError("run: must be a table")
    kind = _need(run, "kind", "run")
    if kind not in KINDS:
        raise ConfigError(f"run.kind: unknown kind {kind!r} (expected one of {', '.join(KINDS)})")
    if "master_seed" not in run:
        raise ConfigError("run.master_seed: missing (wall-clock seeding is not supported)")
    _pos_int(run["master_seed"], "run.master_seed", allow_zero=True)
    for k, v in RUN_DEFAULTS.items():
        run.setdefault(k, v)
    if paper_scale:
        run.update(PAPER_SCALE)
    # precedence: explicit argument, then environment, then the file
    env_workers = os.environ.get("SVV_WORKERS", "").strip()
    if workers is not None:
        run["workers"] = workers
    elif env_workers:
        try:
            run["workers"] = int(env_workers)
        except ValueError:
            raise ConfigError(f"SVV_WORKERS: must be a positive integer (got {env_workers!r})") from None
    run.setdefault("workers", 1)
    for key in ("n_paths", "n_inner", "n_outer", "partition_n", "workers", "n_eval"):
        _pos_int(run[key], f"run.{key}")
    _pos_int(run["degree"], "run.degree", allow_zero=True)
    _pos_int(run["path_index"], "run.path_index", allow_zero=True)
    _real(run["ridge"], "run.ridge")

    grid = _need(cfg, "grid", "config")
    _pos_int(_need(grid, "N", "grid"), "grid.N")
    if _real(_need(grid, "T", "grid"), "grid.T") <= 0:
        raise ConfigError("grid.T: must be positive")

    needs = list(NEEDS[kind])
    if kind == "convergence" and run["quantity"] != "kernel":
        needs += ["market", "sandwich"]
        if run["quantity"] == "hedge":
            needs.append("payoff")
    for sec in needs:
        if sec not in cfg:
            raise ConfigError(f"{sec}: section required for run.kind = {kind!r}")
    if "market" in cfg:
        mk = cfg["market"]
        _real(_need(mk, "x0", "market"), "market.x0")
        _real(_need(mk, "rho", "market"), "market.rho")
        _real(mk.get("nu", 0.0), "market.nu")
    if "sandwich" in cfg:
        sw = cfg["sandwich"]
        for key in ("phi", "psi"):
            v = _need(sw, key, "sandwich")
            if isinstance(v, dict):
                if v.get("type") not in ("constant", "linear", "exp"):
                    raise ConfigError(f"sandwich.{key}.type: expected constant, linear or exp")
                _real(_need(v, "a", f"sandwich.{key}"), f"sandwich.{key}.a")
                _real(v.get("b", 0.0), f"sandwich.{key}.b")
            else:
                _real(v, f"sandwich.{key}")
        for key in ("gamma", "c", "y0"):
            _real(_need(sw, key, "sandwich"), f"sandwich.{key}")
        _real(sw.get("c3", 1.0), "sandwich.c3")
    if "kernel" in cfg:
        kn = cfg["kernel"]
        t = _need(kn, "type", "kernel")
        required = {"power": ("exponent",), "fractional": ("H",), "zero": (), "constant": ("value",)}
        if t not in required:
            raise ConfigError(f"kernel.type: unknown kernel type {t!r}")
        for key in required[t]:
            _real(_need(kn, key, "kernel"), f"kernel.{key}")
    if "approx" in cfg:
        ap = cfg["approx"]
        if _need(ap, "scheme", "approx") not in ("ou", "bernstein"):
            raise ConfigError(f"approx.scheme: expected 'ou' or 'bernstein' (got {ap['scheme']!r})")
        if kind in ("kernel-error", "vol-error", "price-error", "convergence"):
            ms = _need(ap, "m_values", "approx")
            if not isinstance(ms, list) or not ms:
                raise ConfigError("approx.m_values: must be a non-empty list")
            for i, m in enumerate(ms):
                _pos_int(m, f"approx.m_values[{i}]")
            if kind == "convergence" and len(ms) < 3:
                raise ConfigError("approx.m_values: a convergence study needs at least 3 values")
            if "m_ref" in ap:
                _pos_int(ap["m_ref"], "approx.m_ref")
        else:
            _pos_int(_need(ap, "m", "approx"), "approx.m")
    if "payoff" in cfg:
        pf = cfg["payoff"]
        t = _need(pf, "type", "payoff")
        if t not in ("call", "digital", "identity", "constant"):
            raise ConfigError(f"payoff.type: unknown payoff {t!r}")
        if t == "call":
            _real(_need(pf, "strike", "payoff"), "payoff.strike")
        if t == "digital":
            _real(_need(pf, "level", "payoff"), "payoff.level")
    out = cfg.setdefault("output", {})
    env_out = os.environ.get("SVV_OUT_DIR", "").strip()
    if out_dir is not None:
        out["dir"] = out_dir
    elif env_out:
        out["dir"] = env_out
    out.setdefault("dir", "svv-out")
    fmts = out.setdefault("formats", ["csv", "json"])
    if not isinstance(fmts, list) or any(f not in ("csv", "json") for f in fmts):
        raise ConfigError("output.formats: expected a list drawn from 'csv' and 'json'")
    return ExperimentConfig(cfg)
