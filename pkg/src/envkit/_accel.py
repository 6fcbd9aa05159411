"""Numba on/off switch.

Set ``ENVKIT_NO_NUMBA=1`` to force the pure-numpy kernels. When numba is not
importable the numpy kernels are used as well.
"""

import os

_DISABLED_VALUES = {"1", "true", "yes", "on"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

NUMBA_REQUESTED = os.environ.get("ENVKIT_NO_NUMBA", "").strip().lower() not in _DISABLED_VALUES
NUMBA_ENABLED = NUMBA_REQUESTED and _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, otherwise a no-op decorator.

    Kernels written against this decorator must stay valid plain Python so
    they can still be called (slowly) by the benchmark and the equivalence
    tests when numba is missing.
    """
    if _numba is not None:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
