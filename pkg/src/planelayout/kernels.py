"""Backend selection for the raster kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy fallback. Set ``PLANELAYOUT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PLANELAYOUT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

fill_polygon = _impl.fill_polygon
zbuffer_polygon = _impl.zbuffer_polygon
min_fill_pass = _impl.min_fill_pass


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
