"""Numba switch.

Set ``JOSTSCAT_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  When numba
is missing the fallback is selected automatically.
"""
import os
import warnings

_DISABLED = os.environ.get("JOSTSCAT_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit, prange

    # an old system TBB only disables one threading layer; numba falls back by itself
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def use_numba():
    """True when the compiled kernels are active."""
    return HAVE_NUMBA
