"""Integration kernel backends.

The compiled Cython kernel is preferred when importable; otherwise the
pure-numpy implementation takes over with identical semantics.  Set
``ESDM_BACKEND=python`` or ``ESDM_BACKEND=compiled`` before import to
force a choice (``compiled`` raises if the extension is missing).
"""

import os

from .numpy_backend import (
    BLOWUP_LIMIT,
    POLICY_LOG,
    POLICY_NONE,
    POLICY_PROJECTION,
    RATIO_CLAMP,
    SCHEME_EM,
    SCHEME_MILSTEIN,
)

_choice = os.environ.get("ESDM_BACKEND", "auto").lower()
if _choice not in {"auto", "compiled", "python"}:
    raise ValueError(
        f"ESDM_BACKEND must be auto, compiled or python, got {_choice!r}")

if _choice == "python":
    from . import numpy_backend as _impl
    backend_name = "python"
else:
    try:
        from . import _core as _impl
        backend_name = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import numpy_backend as _impl
        backend_name = "python"

integrate_paths = _impl.integrate_paths
