"""Numba switch.

Hot loops are written twice: an ``@njit`` loop version and a vectorised
numpy version. Which one the public functions dispatch to is decided once,
at import time, from the ``SVV_DISABLE_NUMBA`` environment variable (any
non-empty value other than ``0`` disables numba) and from whether numba is
importable at all.
"""

from __future__ import annotations

import functools
import os

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    NUMBA_AVAILABLE = False

_flag = os.environ.get("SVV_DISABLE_NUMBA", "").strip()
USE_NUMBA = NUMBA_AVAILABLE and _flag in ("", "0")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    The loop versions stay importable (and callable, slowly) without numba,
    which keeps the numba/numpy cross-check tests meaningful either way.
    """
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def deco(f):
        @functools.wraps(f)
        def wrapper(*a, **kw):
            return f(*a, **kw)

        return wrapper

    return deco


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


__all__ = ["njit", "USE_NUMBA", "NUMBA_AVAILABLE", "backend"]
