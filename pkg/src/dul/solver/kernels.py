"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``DUL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from dul.solver import _fallback

if os.environ.get("DUL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from dul.solver import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

tridiag_solve = _impl.tridiag_solve
theta_march = _impl.theta_march
