"""
Numba shim.

Kernels in :mod:`momex.kernels` are written twice: a loop version compiled
with ``numba.njit`` and a vectorised numpy version.  The numpy path is used
when numba is missing or when ``MOMEX_DISABLE_NUMBA`` is set to a truthy value
before import.
"""
import os
import warnings

_FLAG = "MOMEX_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kw):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

    warnings.warn("numba is not installed - falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def set_num_threads(n):
    """Pin numba and BLAS thread pools to ``n`` threads (best effort)."""
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(limits=n)
