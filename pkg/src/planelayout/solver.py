"""Subset search: pick at most one polygon per plane so that the projections
partition the image, minimizing the precomputed cost.

Two exact strategies share one feasibility rule and one tie order:

* small candidate sets walk the lazy per-plane product, pruning partial
  products whose overlap already exceeds the tolerance;
* larger sets run a branch-and-bound exact cover over "cells" (maximal pixel
  sets covered by the same candidates), branching on the largest uncovered
  cell.

Ties on cost go to fewer polygons, then to the lexicographically smaller
sorted id tuple.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cost import total_cost
from .raster import PartitionTolerance, partition_report


@dataclass(frozen=True)
class SolveConfig:
    lam: float = 1.0
    plausibility_min_gap: float = 0.05
    min_area: float = 1e-4
    partition: PartitionTolerance = PartitionTolerance()
    exhaustive_fallback_limit: int = 20

    def __post_init__(self):
        if self.lam < 0 or self.plausibility_min_gap <= 0 or self.min_area <= 0:
            raise ValueError("solver thresholds must be positive")


@dataclass
class SearchStats:
    method: str = ""
    candidates: int = 0
    plausible: int = 0
    subsets_generated: int = 0
    subsets_partition_ok: int = 0
    seconds: float = 0.0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Solution:
    polygons: list
    cost: float
    report: SearchStats = field(default_factory=SearchStats)

    @property
    def ids(self):
        return tuple(p.id for p in self.polygons)


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _seg_seg_distance(p1, q1, p2, q2):
    """Minimum distance between 3D segments [p1, q1] and [p2, q2]."""
    p1, q1, p2, q2 = (tuple(map(float, x)) for x in (p1, q1, p2, q2))
    d1 = (q1[0] - p1[0], q1[1] - p1[1], q1[2] - p1[2])
    d2 = (q2[0] - p2[0], q2[1] - p2[1], q2[2] - p2[2])
    r = (p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2])
    a, e, f = _dot(d1, d1), _dot(d2, d2), _dot(d2, r)
    eps = 1e-15

    def clip(x):
        return min(max(x, 0.0), 1.0)

    if a <= eps and e <= eps:
        s = t = 0.0
    elif a <= eps:
        s, t = 0.0, clip(f / e)
    else:
        c = _dot(d1, r)
        if e <= eps:
            t, s = 0.0, clip(-c / a)
        else:
            b = _dot(d1, d2)
            denom = a * e - b * b
            s = clip((b * f - c * e) / denom) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0:
                t, s = 0.0, clip(-c / a)
            elif t > 1:
                t, s = 1.0, clip((b - c) / a)
    w = [p1[k] + d1[k] * s - p2[k] - d2[k] * t for k in range(3)]
    return math.sqrt(_dot(w, w))


def _merge_collinear(points, tol=1e-9):
    """Drop vertices lying strictly inside a straight run of the loop."""
    pts = np.asarray(points, dtype=float)
    u = pts - np.roll(pts, 1, axis=0)
    v = np.roll(pts, -1, axis=0) - pts
    cr = np.linalg.norm(np.cross(u, v), axis=1)
    scale = np.maximum(np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1), 1e-300)
    keep = (cr > tol * scale) | (np.einsum("ij,ij->i", u, v) < 0)
    return pts[keep]


def polygon_area_3d(points):
    pts = np.asarray(points, dtype=float)
    return 0.5 * float(np.linalg.norm(np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)))


def plausibility_filter(poly, cfg=None):
    """Reject slivers: any two non-touching edges closer than the gap, or a
    3D area below the floor. Collinear vertex runs count as one edge."""
    cfg = cfg or SolveConfig()
    pts = poly.points if hasattr(poly, "points") else np.asarray(poly)
    if polygon_area_3d(pts) < cfg.min_area:
        return False
    pts = _merge_collinear(pts)
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            d = _seg_seg_distance(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n])
            if d < cfg.plausibility_min_gap:
                return False
    return True


def _group_by_plane(polys):
    groups = {}
    for p in sorted(polys, key=lambda p: p.id):
        groups.setdefault(p.plane, []).append(p)
    return [groups[k] for k in sorted(groups)]


def enumerate_feasible(polys, cfg=None, masks=None, num_pixels=None, plausible=None):
    """Yield sorted id tuples with at most one plausible polygon per plane.

    Planes are visited by id and, within a plane, "no polygon" comes before
    polygons in id order. With ``masks`` given, partial products whose
    excess coverage already exceeds the overlap tolerance are cut.
    """
    cfg = cfg or SolveConfig()
    if plausible is None:
        plausible = lambda p: plausibility_filter(p, cfg)  # noqa: E731
    groups = [[p for p in g if plausible(p)] for g in _group_by_plane(polys)]
    groups = [g for g in groups if g]
    limit = None
    if masks is not None:
        num_pixels = num_pixels or next(iter(masks.values())).size
        limit = cfg.partition.max_overlap
    areas = {p.id: int(np.count_nonzero(masks[p.id])) for g in groups for p in g} if masks else {}

    def rec(k, chosen, union, excess):
        if k == len(groups):
            yield tuple(sorted(chosen))
            return
        yield from rec(k + 1, chosen, union, excess)
        for p in groups[k]:
            if masks is None:
                yield from rec(k + 1, chosen + [p.id], None, 0)
                continue
            m = masks[p.id]
            new_union = m if union is None else (union | m)
            gained = int(np.count_nonzero(new_union)) - (0 if union is None else int(np.count_nonzero(union)))
            ex = excess + areas[p.id] - gained
            if ex / num_pixels > limit:
                continue
            yield from rec(k + 1, chosen + [p.id], new_union, ex)

    yield from rec(0, [], None, 0)


def _better(key, best):
    return best is None or key < best


def _solve_product(polys, terms, masks, cfg, num_pixels, plausible, stats):
    best, best_key = None, None
    for ids in enumerate_feasible(polys, cfg, masks, num_pixels, plausible):
        if not ids:
            continue
        stats.subsets_generated += 1
        rep = partition_report([masks[i] for i in ids], num_pixels, cfg.partition)
        if not rep.is_partition:
            continue
        stats.subsets_partition_ok += 1
        key = (total_cost(ids, terms, cfg.lam), len(ids), ids)
        if _better(key, best_key):
            best, best_key = ids, key
    return best, best_key


def _cells(polys, masks, num_pixels):
    """Label pixels by the exact set of candidates covering them.

    Two independent 64-bit random hashes per polygon are summed per pixel;
    pixels with equal hash pairs share a cell.
    """
    rng = np.random.default_rng(12345)
    h1 = np.zeros(num_pixels, dtype=np.uint64)
    h2 = np.zeros(num_pixels, dtype=np.uint64)
    pix = {}
    for p in polys:
        idx = np.flatnonzero(masks[p.id])
        pix[p.id] = idx
        r = rng.integers(1, 2**63, size=2, dtype=np.uint64)
        h1[idx] += r[0]
        h2[idx] += r[1]
    _, cell_of = np.unique(np.stack([h1, h2], axis=1), axis=0, return_inverse=True)
    cell_of = cell_of.ravel()
    area = np.bincount(cell_of).astype(np.int64)
    poly_cells = {pid: np.unique(cell_of[idx]) for pid, idx in pix.items()}
    return area, poly_cells


def _solve_cover(polys, terms, masks, cfg, num_pixels, stats):
    area, poly_cells = _cells(polys, masks, num_pixels)
    n_cells = len(area)
    total = int(area.sum())
    cover_of = [[] for _ in range(n_cells)]
    # cheapest options first so good bounds are found early
    unit = {p.id: terms[p.id].k3d + cfg.lam * terms[p.id].k2d for p in polys}
    for p in sorted(polys, key=lambda p: (unit[p.id], p.id)):
        for c in poly_cells[p.id]:
            cover_of[c].append(p)
    # cells never covered by any candidate must be left uncovered
    count = np.zeros(n_cells, dtype=np.int64)
    blocked = np.zeros(n_cells, dtype=bool)
    order = np.lexsort((np.arange(n_cells), -area))  # largest first, then index
    rank = np.empty(n_cells, dtype=np.int64)
    rank[order] = np.arange(n_cells)
    for c in range(n_cells):
        if not cover_of[c]:
            blocked[c] = True

    min_cov, max_ovl = cfg.partition.min_coverage, cfg.partition.max_overlap
    poly_area = {p.id: int(area[poly_cells[p.id]].sum()) for p in polys}
    best = {"ids": None, "key": None}
    state = {"covered": 0, "excess": 0, "skipped": int(area[blocked].sum())}
    used_planes = set()
    chosen = []
    slack = 1e-9

    def feasible_now():
        cov = state["covered"] / num_pixels
        return cov >= min_cov and state["excess"] / num_pixels <= max_ovl

    def uncovered_budget_ok(extra):
        # coverage still reachable if everything not skipped were covered
        return (total - state["skipped"] - extra) / num_pixels >= min_cov

    if not uncovered_budget_ok(0):
        return None, None

    # cheapest cost per pixel on each plane, for a fractional lower bound
    plane_ratio = {}
    for p in polys:
        r = unit[p.id] / max(poly_area[p.id], 1)
        plane_ratio[p.plane] = min(plane_ratio.get(p.plane, r), r)
    need_px = math.ceil(min_cov * num_pixels - 1e-9)

    def lower_bound():
        need = need_px - state["covered"]
        if need <= 0:
            return 0.0
        ratios = [r for q, r in plane_ratio.items() if q not in used_planes]
        return need * min(ratios) if ratios else math.inf

    def rec(partial):
        if best["key"] is not None and partial + lower_bound() > best["key"][0] + slack:
            return
        if feasible_now():
            stats.subsets_generated += 1
            stats.subsets_partition_ok += 1
            ids = tuple(sorted(chosen))
            key = (total_cost(ids, terms, cfg.lam), len(ids), ids)
            if _better(key, best["key"]):
                best["ids"], best["key"] = ids, key
            return
        free = np.flatnonzero((count == 0) & ~blocked)
        if len(free) == 0:
            stats.subsets_generated += 1
            return
        c = free[np.argmin(rank[free])]
        for p in cover_of[c]:
            if best["key"] is not None and partial + unit[p.id] > best["key"][0] + slack:
                break  # options are sorted by cost
            if p.plane in used_planes:
                continue
            cells = poly_cells[p.id]
            overlap = int(area[cells][count[cells] > 0].sum())
            if (state["excess"] + overlap) / num_pixels > max_ovl:
                continue
            gained = poly_area[p.id] - overlap
            count[cells] += 1
            state["covered"] += gained
            state["excess"] += overlap
            used_planes.add(p.plane)
            chosen.append(p.id)
            rec(partial + unit[p.id])
            chosen.pop()
            used_planes.discard(p.plane)
            state["excess"] -= overlap
            state["covered"] -= gained
            count[cells] -= 1
        # leave this cell uncovered if the coverage slack allows it
        if uncovered_budget_ok(int(area[c])):
            blocked[c] = True
            state["skipped"] += int(area[c])
            rec(partial)
            state["skipped"] -= int(area[c])
            blocked[c] = False

    rec(0.0)
    return best["ids"], best["key"]


def solve(polys, terms, masks, cfg=None, num_pixels=None, plausible=None):
    """Minimum-cost partition-feasible subset, or None when none exists.

    ``masks`` maps polygon id to its footprint; ``terms`` maps polygon id to
    PolygonCostTerms. ``plausible`` overrides the sliver filter.
    """
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    polys = sorted(polys, key=lambda p: p.id)
    if not polys:
        return None
    num_pixels = num_pixels or next(iter(masks.values())).size
    if plausible is None:
        plausible = lambda p: plausibility_filter(p, cfg)  # noqa: E731
    stats = SearchStats(candidates=len(polys))
    kept = [p for p in polys if plausible(p)]
    stats.plausible = len(kept)
    if len(kept) <= cfg.exhaustive_fallback_limit:
        stats.method = "product"
        ids, key = _solve_product(kept, terms, masks, cfg, num_pixels, lambda p: True, stats)
    else:
        stats.method = "cover"
        ids, key = _solve_cover(kept, terms, masks, cfg, num_pixels, stats)
    stats.seconds = time.perf_counter() - t0
    if ids is None:
        return None
    by_id = {p.id: p for p in polys}
    return Solution([by_id[i] for i in ids], key[0], stats)
