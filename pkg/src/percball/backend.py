"""Kernel backend selection: numba JIT by default, pure numpy on request.

Every hot kernel in this package exists twice: a loop-style version meant
for numba and a vectorized numpy version.  Which one runs is decided once,
at import time:

* if the environment variable ``PERCBALL_DISABLE_NUMBA`` is set to a truthy
  value ("1", "true", "yes"), the numpy path is used;
* if numba is not importable, the numpy path is used and a note is logged;
* otherwise the loop kernels are compiled with ``@njit(cache=True)``.

``benchmarks/bench_backends.py`` compares the two paths head to head.
"""

from __future__ import annotations

import os

_flag = os.environ.get("PERCBALL_DISABLE_NUMBA", "").strip().lower()
NUMBA_REQUESTED = _flag not in ("1", "true", "yes", "on")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _numba_njit = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and NUMBA_REQUESTED


def njit(*args, **kwargs):
    """``numba.njit`` when the numba backend is active, identity otherwise.

    Loop kernels keep working (slowly) as plain Python functions when the
    numpy backend is selected, which is what the backend-equivalence tests
    rely on.
    """
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


def select(numba_impl, numpy_impl):
    """Pick the implementation the active backend should run."""
    return numba_impl if NUMBA_ENABLED else numpy_impl


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
