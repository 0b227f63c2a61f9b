"""Split-scan kernel with a compiled fast path.

The Cython extension is used when it built successfully; otherwise the
numpy fallback takes over.  Set ``AUTODS_PURE_PY=1`` to force the
fallback (useful for benchmarking and for debugging suspected kernel
issues).  Both paths return bit-identical results.
"""

import os

from . import _split_py

if os.environ.get("AUTODS_PURE_PY", "").strip() not in ("", "0"):
    scan_feature = _split_py.scan_feature
    BACKEND = "python"
else:
    try:
        from . import _split as _split_ext

        scan_feature = _split_ext.scan_feature
        BACKEND = "cython"
    except ImportError:
        scan_feature = _split_py.scan_feature
        BACKEND = "python"

__all__ = ["scan_feature", "BACKEND", "backend_name"]


def backend_name() -> str:
    return BACKEND
