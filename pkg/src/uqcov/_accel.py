"""Backend selection for the hot numeric kernels.

Kernels are written once in a numba-compatible subset of numpy. When numba is
importable and ``UQCOV_DISABLE_NUMBA`` is unset (or ``0``), they are compiled
with ``numba.njit``; otherwise the same source runs as plain numpy. A kernel
may also register a separate vectorized numpy implementation to use when
numba is off, for loops that would be slow in the interpreter.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("UQCOV_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

# name -> (numba-compatible source function, numpy fallback)
KERNELS = {}


def hot(fallback=None):
    """Decorator registering ``func`` as a hot kernel.

    Returns the jitted function when numba is active, else ``fallback`` (or
    ``func`` itself when no fallback is given).
    """

    def decorate(func):
        numpy_impl = fallback if fallback is not None else func
        KERNELS[func.__name__] = (func, numpy_impl)
        if USE_NUMBA:
            return numba.njit(cache=True, nogil=True)(func)
        return numpy_impl

    return decorate


def backend():
    return "numba" if USE_NUMBA else "numpy"


def numpy_kernel(name):
    """The pure-numpy path of a registered kernel, whatever the active backend."""
    return KERNELS[name][1]
