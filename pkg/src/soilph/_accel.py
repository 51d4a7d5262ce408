"""Backend selection for the numeric kernels.

Set ``SOILPH_NO_NUMBA=1`` to force the pure-numpy paths (also used
automatically when numba cannot be imported).
"""
import os

_DISABLED = os.environ.get("SOILPH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Compilation is lazy (first call), so importing a kernel module is
    cheap even when only the numpy path ends up being used.
    """
    if _numba is None:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
