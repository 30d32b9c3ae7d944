"""Per-polygon cost terms and the total layout cost.

The 3D term is a hinge on the input depth being behind the polygon (the
layout must lie behind scene objects); the 2D term compares a polygon's
footprint with the detected planar regions. Both are computed once per
candidate and summed over a subset during the search.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import plane_depth, valid_depth


@dataclass
class SegmentationRegions:
    """Planar regions keyed by plane id, all (H, W) bool masks."""

    masks: dict

    def __post_init__(self):
        shapes = {m.shape for m in self.masks.values()}
        if len(shapes) > 1:
            raise ValueError("region masks differ in size")
        self.masks = {int(k): np.asarray(v, dtype=bool) for k, v in self.masks.items()}
        self._union = None

    @property
    def union(self):
        if self._union is None:
            if not self.masks:
                return None
            self._union = np.logical_or.reduce(list(self.masks.values()))
        return self._union

    def get(self, plane_id):
        return self.masks.get(plane_id)

    def others(self, plane_id):
        """Union of all regions except the one of ``plane_id``."""
        rest = [m for k, m in self.masks.items() if k != plane_id]
        if not rest:
            return None
        return np.logical_or.reduce(rest)


@dataclass(frozen=True)
class PolygonCostTerms:
    polygon: int
    k3d: float
    k2d: float


def iou(a, b):
    if a is None or b is None:
        return 0.0
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def k3d_term(footprint, depth, polygon_depth, num_pixels=None):
    """(1/|I|) * sum over the footprint of max(D - D', 0).

    Pixels where either map is invalid contribute nothing; the normalizer
    stays the full image size.
    """
    num_pixels = num_pixels or depth.size
    sel = footprint & valid_depth(depth) & valid_depth(polygon_depth)
    if not sel.any():
        return 0.0
    diff = depth[sel] - polygon_depth[sel]
    return float(np.maximum(diff, 0.0).sum() / num_pixels)


def k2d_term(footprint, plane_id, regions):
    """(1 - IoU(p(R), S(I,R))) + IoU(p(R), S(I) minus S(I,R)).

    A plane with no detected region gets IoU 0 in the first term and is
    compared against the union of all regions in the second.
    """
    own = regions.get(plane_id)
    if own is None:
        return 1.0 + iou(footprint, regions.union)
    return (1.0 - iou(footprint, own)) + iou(footprint, regions.others(plane_id))


def compute_terms(polygons, masks, planes, K, depth, regions):
    """Precompute terms for every candidate. ``masks`` maps polygon id to its
    rasterized footprint; ``depth`` may be None (2D-only cost)."""
    terms = {}
    others = {pid: regions.others(pid) for pid in regions.masks}
    plane_z = {}
    for poly in polygons:
        fp = masks[poly.id]
        if depth is not None:
            if poly.plane not in plane_z:
                plane_z[poly.plane] = plane_depth(planes[poly.plane], K)
            k3 = k3d_term(fp, depth, np.where(fp, plane_z[poly.plane], 0.0), K.num_pixels)
        else:
            k3 = 0.0
        own = regions.get(poly.plane)
        if own is None:
            k2 = 1.0 + iou(fp, regions.union)
        else:
            k2 = (1.0 - iou(fp, own)) + iou(fp, others[poly.plane])
        terms[poly.id] = PolygonCostTerms(poly.id, k3, k2)
    return terms


def total_cost(ids, terms, lam=1.0):
    """Sum of k3d plus ``lam`` times sum of k2d, accumulated in id order."""
    s3 = 0.0
    s2 = 0.0
    for i in sorted(ids):
        t = terms[i]  # KeyError on a missing term is deliberate
        s3 += t.k3d
        s2 += t.k2d
    return s3 + lam * s2
