"""JIT shim: numba-accelerated kernels with a pure-Python escape hatch.

Every hot function in the package is decorated with :func:`njit` from this
module.  By default that is ``numba.njit``; setting the environment variable
``EEECOAL_NO_NUMBA=1`` (before import) turns it into a no-op so the exact
same code runs as plain Python/numpy.  The fallback is slow but produces
identical results, which is what ``benchmarks/bench_sim.py`` measures.
"""

import os

NUMBA_ENABLED = os.environ.get("EEECOAL_NO_NUMBA", "").lower() not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit (supports bare and parametrized use)."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap
