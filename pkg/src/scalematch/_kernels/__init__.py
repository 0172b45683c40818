"""Kernel backend selection.

Prefers the compiled extension; falls back to the NumPy implementation when
it is not built.  SCALEMATCH_KERNELS=python|native forces a backend ("native"
raises if the extension is unavailable).
"""

import os

from ..errors import ConfigError

_choice = os.environ.get("SCALEMATCH_KERNELS", "auto").lower()

if _choice == "python":
    from . import _fallback as _impl
elif _choice == "native":
    from . import _native as _impl  # type: ignore[no-redef]
elif _choice == "auto":
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _fallback as _impl
else:
    raise ConfigError(f"SCALEMATCH_KERNELS must be auto, python or native, got {_choice!r}")

BACKEND = _impl.BACKEND_NAME
fill_polygons = _impl.fill_polygons
warp_bilinear = _impl.warp_bilinear
diffuse_iterate = _impl.diffuse_iterate
