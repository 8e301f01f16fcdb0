"""Optional numba acceleration.

Set ``SINGULAR_SPADE_NO_NUMBA=1`` to force the pure-numpy kernels (useful for
debugging, or where numba is unavailable).  The decision is made once, at
import time.
"""
import os

_flag = os.environ.get("SINGULAR_SPADE_NO_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    # the bundled TBB is too old for numba and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:
    numba = None

USE_NUMBA = numba is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if numba is not None:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


if numba is not None:
    prange = numba.prange
else:
    prange = range
