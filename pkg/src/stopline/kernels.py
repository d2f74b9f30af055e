"""Backend selection for the hot per-pixel kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module with identical semantics is used. Set ``STOPLINE_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import os

from stopline import _pykernels

if os.environ.get("STOPLINE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from stopline import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

nearest_site = _impl.nearest_site
label8 = _impl.label8
clipped_distance = _impl.clipped_distance

__all__ = ["BACKEND", "nearest_site", "clipped_distance", "label8"]
