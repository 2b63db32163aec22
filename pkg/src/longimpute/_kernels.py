"""Kernel backend selection.

The compiled extension is preferred; set ``LONGIMPUTE_PURE=1`` to force the
numpy implementation.
"""

import os

from . import _kernels_py

if os.environ.get("LONGIMPUTE_PURE", "") not in ("", "0"):
    _impl = None
else:
    try:
        from ._ext import _ckernels as _impl
    except ImportError:
        _impl = None

if _impl is None:
    _impl = _kernels_py
    BACKEND = "python"
else:
    BACKEND = "cython"

residual_update = _impl.residual_update
