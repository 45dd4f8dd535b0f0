"""Selects the integration kernel at import time.

The compiled extension is used when importable; ``TOPPMPC_BACKEND=python``
forces the pure-Python kernel. ``BACKEND`` names the active one.
"""
import os
import warnings

from . import _pykernel

_requested = os.environ.get("TOPPMPC_BACKEND", "auto").lower()

if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"unknown TOPPMPC_BACKEND {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _kernel as _compiled
    except ImportError:
        if _requested == "compiled":
            raise
        warnings.warn("toppmpc compiled kernel unavailable; using the slow "
                      "pure-Python fallback", RuntimeWarning, stacklevel=2)

if _compiled is not None:
    advance = _compiled.advance
    advance_batch = _compiled.advance_batch
    BACKEND = "compiled"
else:
    advance = _pykernel.advance
    advance_batch = _pykernel.advance_batch
    BACKEND = "python"
