"""Kernel backend selection.

Hot loops (sparse matrix products, BFS, sampled dense-dense products) have
two implementations: a numba-jitted one and a vectorized numpy/scipy one.
The active backend is chosen once at import from the ADAPTCS_BACKEND
environment variable and can be switched at runtime for benchmarking:

  ADAPTCS_BACKEND=numba   require numba, fail if it cannot be imported
  ADAPTCS_BACKEND=numpy   force the numpy/scipy fallback path
  unset or "auto"         use numba when importable, fallback otherwise
"""

from __future__ import annotations

import os

from .errors import UsageError

_VALID = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401

    NUMBA_IMPORTABLE = True
except ImportError:
    NUMBA_IMPORTABLE = False

_active = None


def _resolve(name: str) -> str:
    if name not in _VALID:
        raise UsageError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "numba" and not NUMBA_IMPORTABLE:
        raise UsageError("backend 'numba' requested but numba is not importable")
    if name == "auto":
        return "numba" if NUMBA_IMPORTABLE else "numpy"
    return name


def active_backend() -> str:
    """Return the backend currently in effect ("numba" or "numpy")."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get("ADAPTCS_BACKEND", "auto").lower())
    return _active


def set_backend(name: str) -> str:
    """Switch backends at runtime; returns the backend now in effect."""
    global _active
    _active = _resolve(name)
    return _active
