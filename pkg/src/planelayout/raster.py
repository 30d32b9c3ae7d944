"""Software rasterization of polygons into masks, depth and label maps.

Depth maps are z-depth in meters, float64 (H, W); 0 or non-finite marks an
invalid pixel. Label maps are int32 with -1 for background.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PartitionTolerance:
    min_coverage: float = 0.995
    max_overlap: float = 0.005


@dataclass(frozen=True)
class PartitionReport:
    is_partition: bool
    coverage_fraction: float
    overlap_fraction: float


def valid_depth(depth):
    return np.isfinite(depth) & (depth > 0)


def rasterize_pixels(pixels, K):
    """Mask of pixel centers inside a 2D polygon given in pixel coordinates."""
    pixels = np.asarray(pixels, dtype=float)
    return kernels.fill_polygon(pixels[:, 0], pixels[:, 1], K.height, K.width).astype(bool)


def rasterize_polygon(poly, K):
    mask = rasterize_pixels(poly.pixels, K)
    poly.area_px = int(mask.sum())
    return mask


def plane_depth(plane, K, mask=None):
    """z-depth of ``plane`` along every pixel-center ray (0 where invalid)."""
    rays = K.pixel_rays()
    n = plane.normal
    ndr = (n[0] * rays[..., 0] + n[1] * rays[..., 1]) + n[2]
    ok = np.abs(ndr) >= kernels._pykernels.NEAR_PARALLEL
    z = np.zeros(K.shape)
    z[ok] = plane.offset / ndr[ok]
    z[~(z > 0)] = 0.0
    if mask is not None:
        z[~mask] = 0.0
    return z


def render_layout_depth(polys, planes, K):
    """Z-buffered depth and label maps of a set of polygons.

    ``planes`` maps plane id to PlaneEq. Labels hold polygon ids; the nearest
    surface wins and exact depth ties go to the smaller id.
    """
    depth = np.zeros(K.shape)
    labels = np.full(K.shape, -1, dtype=np.int32)
    for poly in polys:
        plane = planes[poly.plane]
        kernels.zbuffer_polygon(poly.pixels[:, 0], poly.pixels[:, 1], plane.normal,
                                plane.offset, K.fx, K.fy, K.cx, K.cy, int(poly.id),
                                depth, labels)
    return depth, labels


def partition_report(masks, num_pixels, tol=None):
    """Coverage is the covered fraction; overlap the excess coverage
    ``(sum of areas - union area) / |I|``."""
    tol = tol or PartitionTolerance()
    masks = list(masks)
    if not masks:
        return PartitionReport(False, 0.0, 0.0)
    count = np.zeros(masks[0].shape, dtype=np.int32)
    for m in masks:
        count += m
    covered = int((count > 0).sum())
    excess = int(count.sum()) - covered
    cov, ovl = covered / num_pixels, excess / num_pixels
    return PartitionReport(cov >= tol.min_coverage and ovl <= tol.max_overlap, cov, ovl)


def partition_check(polys, K, tol=None):
    return partition_report([rasterize_polygon(p, K) for p in polys], K.num_pixels, tol)
