"""Numba toggle.

Set ``NOISYABC_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels (useful for debugging, profiling and for platforms without numba).
"""

import os

_FLAG = os.environ.get("NOISYABC_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover
    njit = _noop_jit
