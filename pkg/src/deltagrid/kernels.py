"""Backend selection for the hot kernels.

The compiled extension is preferred when present; set the environment
variable ``DELTAGRID_PURE_PYTHON=1`` to force the numpy fallback. ``BACKEND``
reports which one is active.
"""

from __future__ import annotations

import os

if os.environ.get("DELTAGRID_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

interval_cover = _impl.interval_cover
strip_raster = _impl.strip_raster

__all__ = ["BACKEND", "interval_cover", "strip_raster"]
