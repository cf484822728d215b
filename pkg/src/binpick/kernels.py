"""Raster kernel backend selection.

The compiled extension (binpick._speedups) is preferred; the pure
Python/numpy module (binpick._kernels_py) is the fallback. Both implement
the same functions with bit-identical results. Set BINPICK_PURE=1 to force
the fallback, e.g. to compare backends.
"""

import os

from . import _kernels_py

if os.environ.get("BINPICK_PURE") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py


def backend_name():
    return _impl.BACKEND_NAME


def set_backend(name):
    """Switch backends at runtime ('cython' or 'python'); used by benchmarks."""
    global _impl
    if name == "python":
        _impl = _kernels_py
    elif name == "cython":
        from . import _speedups

        _impl = _speedups
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")


def paint_disk(inst, sem, item_id, category, cr, cc, r):
    _impl.paint_disk(inst, sem, item_id, category, cr, cc, r)


def paint_convex_polygon(inst, sem, item_id, category, vrows, vcols):
    _impl.paint_convex_polygon(inst, sem, item_id, category, vrows, vcols)


def flood_size(mask, target, sr, sc):
    return _impl.flood_size(mask, target, sr, sc)


def trace_boundary(mask, target, sr, sc, npixels, rmin, cmin, rmax, cmax):
    return _impl.trace_boundary(mask, target, sr, sc, npixels, rmin, cmin, rmax, cmax)


def disk_hits_label(inst, cr, cc, r):
    return _impl.disk_hits_label(inst, cr, cc, r)


def annulus_label_count(inst, cr, cc, r_in, r_out):
    return _impl.annulus_label_count(inst, cr, cc, r_in, r_out)
