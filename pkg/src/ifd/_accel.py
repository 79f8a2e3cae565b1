"""Optional numba acceleration.

Kernels in :mod:`ifd.kernels` are written in a numba-compatible subset of
Python and compiled with ``@njit`` when numba is importable. Setting the
environment variable ``IFD_DISABLE_NUMBA=1`` forces the pure-numpy fallback
paths, which is useful for debugging and for the benchmark comparison.
"""

import os

_DISABLED = os.environ.get("IFD_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    _njit = None
    NUMBA_AVAILABLE = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def use_numba(override=None):
    """Resolve whether a dispatcher should take the compiled path."""
    if override is None:
        return NUMBA_AVAILABLE
    return bool(override) and NUMBA_AVAILABLE
