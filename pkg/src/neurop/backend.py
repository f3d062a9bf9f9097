"""Kernel backend selection.

Hot pixel loops exist twice: a numba-jitted implementation and a pure-numpy
one. `NEUROP_BACKEND` picks which one is active:

    NEUROP_BACKEND=numba   force the jitted kernels (error if numba missing)
    NEUROP_BACKEND=numpy   force the pure-numpy fallback
    unset / auto           numba when importable, numpy otherwise

The choice is resolved once at import time; `python -m neurop.bench` runs
both and reports timings side by side.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("NEUROP_BACKEND", "auto").strip().lower()

if _FLAG not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"NEUROP_BACKEND must be 'numba', 'numpy' or 'auto', got {_FLAG!r}"
    )

if _FLAG == "numpy":
    _HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        _HAVE_NUMBA = True
    except ImportError:
        if _FLAG == "numba":
            raise
        _HAVE_NUMBA = False


def use_numba() -> bool:
    """True when the jitted kernels are the active backend."""
    return _HAVE_NUMBA


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"
