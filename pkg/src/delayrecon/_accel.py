"""Backend selection for the hot numeric kernels.

Every performance-critical inner loop in this package exists twice: a
numba-jitted loop version and a vectorized pure-numpy version. The active
backend is chosen once, at import time, from the ``DELAYRECON_NUMBA``
environment variable (default: numba when importable). Set
``DELAYRECON_NUMBA=0`` to force the pure-numpy path, e.g. for debugging or
on platforms without a working numba install.

``benchmarks/bench_backends.py`` times the two paths against each other.
"""

import os

_flag = os.environ.get("DELAYRECON_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

NUMBA_AVAILABLE = False
if _want_numba:
    try:
        from numba import njit as _njit

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised via env flag in CI
        NUMBA_AVAILABLE = False
else:
    try:
        from numba import njit as _njit  # noqa: F401  (kept importable for tests)

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover
        NUMBA_AVAILABLE = False

NUMBA_ENABLED = _want_numba and NUMBA_AVAILABLE


def jit(fn):
    """Compile ``fn`` with numba when available, else return None.

    Modules keep both the compiled kernel and its numpy twin around so the
    equivalence tests can compare them regardless of the active backend.
    """
    if NUMBA_AVAILABLE:
        return _njit(cache=True)(fn)
    return None


def pick(numba_fn, numpy_fn):
    """Return the implementation selected by the environment flag."""
    if NUMBA_ENABLED and numba_fn is not None:
        return numba_fn
    return numpy_fn


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
