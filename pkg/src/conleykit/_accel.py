"""Select the compiled graph kernels when available, else the reference ones.

Set ``CONLEYKIT_PURE=1`` to force the reference implementation.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("CONLEYKIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        kernels = _compiled
        BACKEND = "cython"

__all__ = ["kernels", "BACKEND"]
