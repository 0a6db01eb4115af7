"""Kernel backend chosen at import: the compiled extension when it was built,
the pure-Python reference otherwise. Set ``SDVORCH_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("SDVORCH_PURE_PYTHON", "") in ("", "0"):
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"

greedy = _impl.greedy
exact = _impl.exact
contention = _impl.contention


def available() -> dict:
    """Name -> kernel module for every importable backend."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
