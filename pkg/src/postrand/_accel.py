"""Optional numba acceleration.

Kernels in :mod:`postrand.kernels` come in two flavours: a numba ``@njit``
loop and a pure-numpy reference.  Which one the public functions dispatch to
is decided once, at import time:

* ``POSTRAND_NUMBA=0`` forces the numpy path,
* ``POSTRAND_NUMBA=1`` requires numba (import error if missing),
* unset: numba is used when importable.
"""
import os

_flag = os.environ.get("POSTRAND_NUMBA", "").strip().lower()

try:
    import numba
    from numba import njit
    numba_available = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_available = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

if _flag in ("0", "false", "no", "off"):
    USE_NUMBA = False
elif _flag in ("1", "true", "yes", "on"):
    if not numba_available:
        raise ImportError("POSTRAND_NUMBA=1 but numba is not importable")
    USE_NUMBA = True
else:
    USE_NUMBA = numba_available

__all__ = ["njit", "USE_NUMBA", "numba_available"]
