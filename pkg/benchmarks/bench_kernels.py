"""Time the numba loops against the numpy fallbacks on identical inputs.

    python benchmarks/bench_kernels.py [--paths 2000] [--steps 512] [--repeat 3]

Both versions are called directly, so one process covers both backends
regardless of SVV_DISABLE_NUMBA. The first numba call (compilation or cache
load) is excluded from the timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from svv import _loops
from svv._accel import NUMBA_AVAILABLE
from svv.approx import bernstein_fit, ou_discretize
from svv.kernels import make_power_kernel
from svv.noise import factor_model, sample_increments_batch, uniform_grid
from svv.volatility import TOL_REL


def _best(fn, args, shapes, repeat):
    best = float("inf")
    for _ in range(repeat):
        bufs = [np.zeros(s) if len(s) > 1 else np.zeros(s, dtype=np.int64) for s in shapes]
        t0 = time.perf_counter()
        fn(*args, *bufs)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n_paths: int, n_steps: int):
    g = uniform_grid(1.0, n_steps)
    dB1, _ = sample_increments_batch(g, 1, np.arange(n_paths))
    rec = np.array([0, n_steps // 2, n_steps], dtype=np.int64)

    m = 100
    ou = ou_discretize(0.3, m)
    fm = factor_model(ou, g)
    yield (f"OU factors m={m}", _loops.ou_factor_paths_jit, _loops.ou_factor_paths_np,
           (ou.sigmas, fm.decay, np.zeros((n_paths, m)), dB1, rec),
           [(n_paths, n_steps + 1), (n_paths, rec.size, m)])

    bb = bernstein_fit(make_power_kernel(0.4), 10)
    S, inject = factor_model(bb, g)._shift
    d = bb.nodes.size
    yield ("Bernstein factors m=10", _loops.bernstein_factor_paths_jit, _loops.bernstein_factor_paths_np,
           (S, inject, bb.nodes, np.zeros((n_paths, d)), dB1, rec),
           [(n_paths, n_steps + 1), (n_paths, rec.size, d)])

    dz = np.ascontiguousarray(dB1)
    yield ("implicit Euler", _loops.implicit_euler_paths_jit, _loops.implicit_euler_paths_np,
           (np.ones(n_paths), dz, np.full(n_steps + 1, 0.01), np.full(n_steps + 1, 5.0), 1.0, 4.0,
            g.steps, TOL_REL, 200),
           [(n_paths, n_steps + 1), (n_paths,)])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba is not installed; the loop versions run as plain Python")
    print(f"{a.paths} paths x {a.steps} steps, best of {a.repeat}")
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for name, jit, np_fn, args, shapes in cases(a.paths, a.steps):
        _best(jit, args, shapes, 1)  # compile / load cache
        tj = _best(jit, args, shapes, a.repeat)
        tn = _best(np_fn, args, shapes, a.repeat)
        print(f"{name:<24}{tj:>12.4f}{tn:>12.4f}{tn / tj:>10.1f}")


if __name__ == "__main__":
    main()
