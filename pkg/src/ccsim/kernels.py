"""Kernel selection: the compiled extension when available, else the Python reference.

Set CCSIM_PURE_PYTHON=1 to force the reference implementations.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CCSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

lambda_scan = _impl.lambda_scan
window_max = _impl.window_max
walk_cells = _impl.walk_cells
