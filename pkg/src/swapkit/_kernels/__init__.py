"""Hot-kernel backend selection.

The compiled Cython extension is preferred when present; the pure-numpy
twin is used otherwise. Set SWAPKIT_BACKEND=numpy (or =native) to force a
choice; forcing native without the extension built raises at import.
"""

import os

from swapkit._kernels import _numpy

_choice = os.environ.get("SWAPKIT_BACKEND", "auto").lower()

if _choice not in ("auto", "native", "numpy"):
    raise ValueError(f"SWAPKIT_BACKEND must be auto|native|numpy, got {_choice!r}")

_impl = None
if _choice in ("auto", "native"):
    try:
        from swapkit._kernels import _native as _impl
    except ImportError:
        if _choice == "native":
            raise ImportError(
                "SWAPKIT_BACKEND=native but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation` to build it"
            ) from None
if _impl is None:
    _impl = _numpy

BACKEND = _impl.BACKEND_NAME

im2col = _impl.im2col
col2im = _impl.col2im
warp_bilinear = _impl.warp_bilinear

numpy_backend = _numpy
