"""Numba switch.

Hot kernels are written once as plain Python loops and compiled with numba's
``njit`` when it is available. Setting ``NISAC_DISABLE_NUMBA=1`` (or running
without numba installed) makes :func:`njit` a no-op and every caller falls
back to its vectorized numpy path instead.
"""

import os

_FLAG = os.environ.get("NISAC_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by NISAC_DISABLE_NUMBA")
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:
    _numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
