"""Kernel backend selection.

The compiled extension is used when it imports; setting
``MEANSHRINK_BACKEND=python`` forces the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

_py = _kernels_py

try:
    from . import _kernels as _ext
except ImportError:  # extension not built
    _ext = None

_choice = os.environ.get("MEANSHRINK_BACKEND", "auto").lower()
if _choice not in {"auto", "python", "compiled"}:
    raise ImportError(f"MEANSHRINK_BACKEND must be auto, python or compiled, got {_choice!r}")
if _choice == "compiled" and _ext is None:
    raise ImportError("MEANSHRINK_BACKEND=compiled but meanshrink._kernels is not built")

_impl = _py if (_choice == "python" or _ext is None) else _ext

BACKEND = "compiled" if _impl is _ext else "python"


def available():
    """Names of the backends importable in this environment."""
    return ["python"] + (["compiled"] if _ext is not None else [])


def get(name=None):
    """Return the kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _py
    if name == "compiled":
        if _ext is None:
            raise ValueError("compiled backend is not available")
        return _ext
    raise ValueError(f"unknown backend {name!r}")


def _c(X):
    return np.ascontiguousarray(X, dtype=np.float64)


def col_mean_var(X):
    return _impl.col_mean_var(_c(X))


def centered_qsums(X, xbar, q):
    return _impl.centered_qsums(_c(X), _c(xbar), _c(q))
