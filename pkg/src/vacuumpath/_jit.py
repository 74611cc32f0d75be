"""Optional numba acceleration.

Set ``VACUUMPATH_NO_NUMBA=1`` (or run without numba installed) to force the
pure numpy/scipy code paths.  The flag is read once at import time.
"""
import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


_DISABLED = os.environ.get("VACUUMPATH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

HAVE_NUMBA = _have_numba()
USE_NUMBA = HAVE_NUMBA and not _DISABLED

if HAVE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit


def numba_enabled() -> bool:
    return USE_NUMBA
