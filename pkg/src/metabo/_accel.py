"""Optional numba acceleration.

Hot kernels ship in two flavours: a numba ``@njit`` loop version and a
vectorized numpy version. The numba path is used when numba imports and the
environment variable ``METABO_PURE_NUMPY`` is unset (or ``0``). Both paths
are always importable so tests and benchmarks can compare them directly.
"""

from __future__ import annotations

import os

ENV_FLAG = "METABO_PURE_NUMPY"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None
    HAVE_NUMBA = False


def pure_numpy_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not pure_numpy_requested()


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity otherwise."""

    def decorator(func):
        if HAVE_NUMBA:
            return numba.njit(*args, **kwargs)(func)
        return func

    return decorator


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
