"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
numpy implementation is a drop-in fallback. Set VIDEOSEMNET_KERNELS=numpy to
force the fallback (used by the benchmark and by tests comparing backends).
"""

import os

from . import _convnp

_forced = os.environ.get("VIDEOSEMNET_KERNELS", "").lower()

if _forced in ("", "cython"):
    try:
        from . import _convcy as _impl

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _convnp
        BACKEND = "numpy"
else:
    _impl = _convnp
    BACKEND = "numpy"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward

numpy_backend = _convnp
