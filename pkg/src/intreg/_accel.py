"""Kernel backend selection.

Hot loops are written once as plain Python over numpy arrays and compiled
with numba when it is importable and not disabled.  Set
``INTREG_DISABLE_NUMBA=1`` to force the pure-numpy path (useful for
debugging and for the backend benchmark).  Compiled kernels release the GIL,
so node-level work parallelises across Python threads.
"""
import os

_DISABLED = os.environ.get("INTREG_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def jit(func):
    """``numba.njit(cache=True, nogil=True)``, or identity when numba is off."""
    if not HAVE_NUMBA:
        return func
    return _numba.njit(cache=True, nogil=True)(func)
