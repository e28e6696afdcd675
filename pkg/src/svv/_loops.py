"""Hot inner loops, each in a numba flavour (``*_jit``) and a numpy flavour (``*_np``).

The public names at the bottom dispatch on ``_accel.USE_NUMBA``. Both
flavours perform the same floating-point operations in the same order per
path, so they agree to rounding (usually bit for bit).
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# status codes of the implicit Euler kernels
OK = 0
NO_BRACKET = 1
OUTSIDE_SANDWICH = 2


# --------------------------------------------------------------------------
# OU factors: V_i <- exp(-alpha_i dt) (V_i + sigma_i dB)
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def ou_factor_paths_jit(sigmas, decay, v_start, dB1, record, z_out, states_out):
    n, n_steps = dB1.shape
    m = sigmas.shape[0]
    n_rec = record.shape[0]
    v = np.empty(m)
    for p in range(n):
        for i in range(m):
            v[i] = v_start[p, i]
        r = 0
        z = 0.0
        for i in range(m):
            z += v[i]
        z_out[p, 0] = z
        while r < n_rec and record[r] == 0:
            for i in range(m):
                states_out[p, r, i] = v[i]
            r += 1
        for k in range(n_steps):
            db = dB1[p, k]
            z = 0.0
            for i in range(m):
                v[i] = decay[i] * (v[i] + sigmas[i] * db)
                z += v[i]
            z_out[p, k + 1] = z
            while r < n_rec and record[r] == k + 1:
                for i in range(m):
                    states_out[p, r, i] = v[i]
                r += 1


def ou_factor_paths_np(sigmas, decay, v_start, dB1, record, z_out, states_out):
    n, n_steps = dB1.shape
    v = v_start.copy()
    z_out[:, 0] = _rowsum_sequential(v)
    rec = {int(k): j for j, k in enumerate(record)}
    for j, k in enumerate(record):
        if k == 0:
            states_out[:, j, :] = v
    for k in range(n_steps):
        v = decay * (v + sigmas * dB1[:, k : k + 1])
        z_out[:, k + 1] = _rowsum_sequential(v)
        if k + 1 in rec:
            for j, kk in enumerate(record):
                if kk == k + 1:
                    states_out[:, j, :] = v


def _rowsum_sequential(a):
    # left-to-right accumulation, same order as the loop kernel
    out = np.zeros(a.shape[0])
    for i in range(a.shape[1]):
        out += a[:, i]
    return out


# --------------------------------------------------------------------------
# Bernstein lag factors: B <- S B + b dB,  Z = w . B
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def bernstein_factor_paths_jit(shift, inject, weights, b_start, dB1, record, z_out, states_out):
    n, n_steps = dB1.shape
    d = shift.shape[0]
    n_rec = record.shape[0]
    b = np.empty(d)
    nb = np.empty(d)
    for path in range(n):
        for i in range(d):
            b[i] = b_start[path, i]
        z = 0.0
        for i in range(d):
            z += weights[i] * b[i]
        z_out[path, 0] = z
        r = 0
        while r < n_rec and record[r] == 0:
            for i in range(d):
                states_out[path, r, i] = b[i]
            r += 1
        for k in range(n_steps):
            db = dB1[path, k]
            for i in range(d):
                acc = 0.0
                for q in range(d):
                    acc += shift[i, q] * b[q]
                nb[i] = acc + inject[i] * db
            z = 0.0
            for i in range(d):
                b[i] = nb[i]
                z += weights[i] * b[i]
            z_out[path, k + 1] = z
            while r < n_rec and record[r] == k + 1:
                for i in range(d):
                    states_out[path, r, i] = b[i]
                r += 1


def bernstein_factor_paths_np(shift, inject, weights, b_start, dB1, record, z_out, states_out):
    n, n_steps = dB1.shape
    b = b_start.copy()
    z_out[:, 0] = _dot_sequential(b, weights)
    for j, k in enumerate(record):
        if k == 0:
            states_out[:, j, :] = b
    st = shift.T.copy()
    for k in range(n_steps):
        b = b @ st + inject * dB1[:, k : k + 1]
        z_out[:, k + 1] = _dot_sequential(b, weights)
        for j, rk in enumerate(record):
            if rk == k + 1:
                states_out[:, j, :] = b


def _dot_sequential(a, w):
    out = np.zeros(a.shape[0])
    for p in range(a.shape[1]):
        out += w[p] * a[:, p]
    return out


# --------------------------------------------------------------------------
# Drift-implicit Euler with bisection
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _ipow(x, n):
    r = 1.0
    for _ in range(n):
        r *= x
    return r


@njit(cache=True, nogil=True)
def _drift(y, lo_b, hi_b, c, gamma, gamma_int):
    # gamma_int >= 0 flags an integer exponent; repeated products are much cheaper than pow
    if gamma_int >= 0:
        return c / _ipow(y - lo_b, gamma_int) - c / _ipow(hi_b - y, gamma_int)
    return c / (y - lo_b) ** gamma - c / (hi_b - y) ** gamma


@njit(cache=True, nogil=True)
def implicit_euler_paths_jit(y_start, dz, phi, psi, c, gamma, dt, tol_rel, max_iter, y_out, status):
    """status[p] = 0 ok, 1 no sign change in bracket, 2 explicit step left the sandwich."""
    n, n_steps = dz.shape
    eps = 2.220446049250313e-16
    gi = -1
    if gamma == np.floor(gamma) and 0.0 <= gamma <= 16.0:
        gi = int(gamma)
    for p in range(n):
        y = y_start[p]
        y_out[p, 0] = y
        status[p] = 0
        for k in range(n_steps):
            a = phi[k + 1]
            b = psi[k + 1]
            target = y + dz[p, k]
            if c == 0.0:
                if not (a < target < b):
                    status[p] = 2
                    break
                y = target
                y_out[p, k + 1] = y
                continue
            delta = 8.0 * eps * max(1.0, abs(a), abs(b))
            lo = a + delta
            hi = b - delta
            h = dt[k]
            g_lo = lo - h * _drift(lo, a, b, c, gamma, gi) - target
            g_hi = hi - h * _drift(hi, a, b, c, gamma, gi) - target
            if not (g_lo < 0.0 < g_hi):
                status[p] = 1
                break
            # b is decreasing, so g' >= 1 and the root lies between target and target + h b(target)
            if lo < target < hi:
                bt = _drift(target, a, b, c, gamma, gi)
                reach = target + h * bt
                slack = 4.0 * eps * max(1.0, abs(reach)) + 1e-3 * abs(h * bt)
                if bt > 0.0:
                    cand = min(hi, reach + slack)
                    if cand - h * _drift(cand, a, b, c, gamma, gi) - target > 0.0:
                        hi = cand
                    lo = target
                elif bt < 0.0:
                    cand = max(lo, reach - slack)
                    if cand - h * _drift(cand, a, b, c, gamma, gi) - target < 0.0:
                        lo = cand
                    hi = target
                else:
                    lo = target
                    hi = target
            tol = tol_rel * (b - a)
            it = 0
            while hi - lo > tol and it < max_iter:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                g_mid = mid - h * _drift(mid, a, b, c, gamma, gi) - target
                if g_mid < 0.0:
                    lo = mid
                else:
                    hi = mid
                it += 1
            y = 0.5 * (lo + hi)
            y_out[p, k + 1] = y


def implicit_euler_paths_np(
    y_start, dz, phi, psi, c, gamma, dt, tol_rel, max_iter, y_out, status, extra=None, times=None
):
    """Vectorised over paths. ``extra(t, y)`` adds a drift term (numpy only)."""
    n, n_steps = dz.shape
    eps = np.finfo(float).eps
    y = np.array(y_start, dtype=float)
    y_out[:, 0] = y
    status[:] = OK
    alive = np.ones(n, dtype=bool)

    int_gamma = float(gamma).is_integer() and 0.0 <= gamma <= 16.0

    def power(x):
        if not int_gamma:
            return x**gamma
        r = np.ones_like(x)
        for _ in range(int(gamma)):
            r = r * x
        return r

    def drift(v, a, b, t):
        out = c / power(v - a) - c / power(b - v)
        if extra is not None:
            out = out + extra(t, v)
        return out

    for k in range(n_steps):
        a = phi[k + 1]
        b = psi[k + 1]
        t_next = None if times is None else times[k + 1]
        target = y + dz[:, k]
        if c == 0.0 and extra is None:
            bad = alive & ~((a < target) & (target < b))
            status[bad] = OUTSIDE_SANDWICH
            alive &= ~bad
            y = np.where(alive, target, y)
            y_out[:, k + 1] = y
            continue
        delta = 8.0 * eps * max(1.0, abs(a), abs(b))
        h = dt[k]
        lo = np.full(n, a + delta)
        hi = np.full(n, b - delta)
        g_lo = lo - h * drift(lo, a, b, t_next) - target
        g_hi = hi - h * drift(hi, a, b, t_next) - target
        bad = alive & ~((g_lo < 0.0) & (g_hi > 0.0))
        status[bad] = NO_BRACKET
        alive &= ~bad
        if extra is None:
            inside = alive & (lo < target) & (target < hi)
            tt = np.where(inside, target, 0.5 * (a + b))
            bt = drift(tt, a, b, t_next)
            reach = tt + h * bt
            slack = 4.0 * eps * np.maximum(1.0, np.abs(reach)) + 1e-3 * np.abs(h * bt)
            up = inside & (bt > 0.0)
            down = inside & (bt < 0.0)
            flat = inside & (bt == 0.0)
            cand_hi = np.minimum(hi, reach + slack)
            cand_lo = np.maximum(lo, reach - slack)
            ok_hi = up & (cand_hi - h * drift(np.where(up, cand_hi, tt), a, b, t_next) - target > 0.0)
            ok_lo = down & (cand_lo - h * drift(np.where(down, cand_lo, tt), a, b, t_next) - target < 0.0)
            hi = np.where(ok_hi, cand_hi, hi)
            lo = np.where(ok_lo, cand_lo, lo)
            lo = np.where(up | flat, target, lo)
            hi = np.where(down | flat, target, hi)
        tol = tol_rel * (b - a)
        it = 0
        active = alive.copy()
        while it < max_iter:
            active &= (hi - lo) > tol
            if not active.any():
                break
            mid = 0.5 * (lo + hi)
            active &= (mid > lo) & (mid < hi)
            g_mid = mid - h * drift(mid, a, b, t_next) - target
            go_up = active & (g_mid < 0.0)
            go_down = active & ~(g_mid < 0.0)
            lo = np.where(go_up, mid, lo)
            hi = np.where(go_down, mid, hi)
            it += 1
        y = np.where(alive, 0.5 * (lo + hi), y)
        y_out[:, k + 1] = y


if USE_NUMBA:
    ou_factor_paths = ou_factor_paths_jit
    bernstein_factor_paths = bernstein_factor_paths_jit
    implicit_euler_paths = implicit_euler_paths_jit
else:
    ou_factor_paths = ou_factor_paths_np
    bernstein_factor_paths = bernstein_factor_paths_np
    implicit_euler_paths = implicit_euler_paths_np
