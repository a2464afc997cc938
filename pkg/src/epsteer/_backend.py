"""Kernel backend selection.

The hot propagation kernels exist twice: a numba-jitted version and a pure
numpy version with identical semantics. The environment flag

    EPSTEER_BACKEND = auto | numba | numpy     (default: auto)

selects between them at import time: ``numpy`` forces the fallback path,
``numba`` requires numba and raises if it cannot be imported, and ``auto``
uses numba whenever it is importable.

``EPSTEER_THREADS`` caps numba threading (0 = auto, i.e. leave the numba
default alone). The stock kernels are serial, so the cap is a ceiling, not
a parallelism request.
"""

import os

_VALID = ("auto", "numba", "numpy")


def _select() -> str:
    choice = os.environ.get("EPSTEER_BACKEND", "auto").strip().lower()
    if choice not in _VALID:
        raise ValueError(
            f"EPSTEER_BACKEND={choice!r} is not one of {_VALID}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise ImportError("EPSTEER_BACKEND=numba but numba is not importable")
        return "numpy"
    return "numba"


BACKEND = _select()
USE_NUMBA = BACKEND == "numba"


def thread_cap() -> int:
    """Parse EPSTEER_THREADS; 0 means auto."""
    raw = os.environ.get("EPSTEER_THREADS", "0").strip() or "0"
    cap = int(raw)
    if cap < 0:
        raise ValueError(f"EPSTEER_THREADS={raw!r} must be >= 0")
    return cap


def apply_thread_cap() -> int:
    """Apply the EPSTEER_THREADS ceiling to the numba thread pool, if active."""
    cap = thread_cap()
    if cap > 0 and USE_NUMBA:
        import numba

        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
    return cap
