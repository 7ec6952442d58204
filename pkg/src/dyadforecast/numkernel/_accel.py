"""Switch between numba-compiled kernels and the pure-numpy fallback.

Set ``DYADFC_DISABLE_NUMBA=1`` before import to force the numpy path.
"""
import os

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAVE_NUMBA = False

DISABLE_ENV = "DYADFC_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Compilation happens even when ``USE_NUMBA`` is false so that both
    paths stay importable side by side (tests and the benchmark compare them).
    """

    def decorator(func):
        if HAVE_NUMBA:
            return njit(*args, **kwargs)(func)
        return func

    return decorator
