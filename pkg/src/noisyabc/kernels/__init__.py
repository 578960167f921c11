"""Hot numeric kernels with a numba implementation and a pure-numpy fallback.

The active backend is chosen once at import time from
``NOISYABC_DISABLE_NUMBA`` (see :mod:`noisyabc._accel`). Both backends stay
importable as ``numpy_backend`` / ``numba_backend`` for cross-checks and
benchmarks.
"""

from .._accel import USE_NUMBA
from . import _numpy as numpy_backend

if USE_NUMBA:
    from . import _numba as numba_backend

    backend = numba_backend
else:
    numba_backend = None
    backend = numpy_backend

BACKEND_NAME = "numba" if USE_NUMBA else "numpy"

stable_tau_grad = backend.stable_tau_grad
gk_tau_grad = backend.gk_tau_grad
stable_iid_scores = backend.stable_iid_scores
gk_iid_scores = backend.gk_iid_scores
ar1_mixture = backend.ar1_mixture

__all__ = [
    "BACKEND_NAME",
    "ar1_mixture",
    "backend",
    "gk_iid_scores",
    "gk_tau_grad",
    "numba_backend",
    "numpy_backend",
    "stable_iid_scores",
    "stable_tau_grad",
]
