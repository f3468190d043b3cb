"""Kernel backend selection.

Every hot kernel exists twice: an explicit-loop version compiled with
``numba.njit`` and a vectorized numpy version. ``COMPCACHE_DISABLE_NUMBA=1``
(read at import time) selects the numpy versions. Both consume the same
pre-drawn random arrays, so the backends agree up to summation order.
"""

import os

try:
    import numba

    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_INSTALLED = False

_FLAG = os.environ.get("COMPCACHE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = NUMBA_INSTALLED and _FLAG not in ("1", "true", "yes", "on")


def jit(func):
    """Compile ``func`` with numba if installed; return it unchanged otherwise."""
    if NUMBA_INSTALLED:
        return numba.njit(cache=True, fastmath=False)(func)
    return func  # pragma: no cover


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
