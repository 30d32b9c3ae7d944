"""Render-and-compare refinement.

The current layout is rendered, compared with the input depth, and where the
input lies clearly behind the layout a plane through the camera center and a
fitted image line is added before solving again. Also holds depth hole
filling and the floor fallback.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .candidates import CandidateConfig, build_candidates
from .cost import compute_terms
from .geometry import PlaneEq, frustum_planes
from .raster import rasterize_polygon, render_layout_depth, valid_depth
from .solver import SolveConfig, solve

log = logging.getLogger(__name__)


def fill_depth_holes(depth, radius=2, max_passes=50):
    """Fill invalid pixels by repeated 5x5 min-dilation of valid neighbours,
    then copy the nearest valid pixel into whatever is left."""
    depth = np.asarray(depth, dtype=np.float64)
    ok = valid_depth(depth)
    if ok.all():
        return depth.copy()
    if not ok.any():
        log.warning("depth map has no valid pixel; left unfilled")
        return depth.copy()
    out = np.where(ok, depth, 0.0)
    for _ in range(max_passes):
        out, n = kernels.min_fill_pass(out, radius)
        if n == 0:
            break
    left = ~(out > 0)
    if left.any():
        _, (iy, ix) = ndimage.distance_transform_edt(left, return_indices=True)
        out = out[iy, ix]
    return out


@dataclass
class DiscrepancyMap:
    """Per-pixel ``max(D - D', 0)`` and the pixels the summary averages over."""

    values: np.ndarray
    layout_mask: np.ndarray

    @classmethod
    def compute(cls, depth, rendered, layout_mask=None):
        ok = valid_depth(depth) & valid_depth(rendered)
        vals = np.zeros(depth.shape)
        vals[ok] = np.maximum(depth[ok] - rendered[ok], 0.0)
        if layout_mask is None:
            layout_mask = np.ones(depth.shape, dtype=bool)
        return cls(vals, np.asarray(layout_mask, dtype=bool))

    @property
    def mean(self):
        if not self.layout_mask.any():
            return 0.0
        return float(self.values[self.layout_mask].mean())


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 500
    threshold: float = 2.0
    min_inlier_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.threshold <= 0:
            raise ValueError("RANSAC needs iterations >= 1 and a positive threshold")


@dataclass(frozen=True)
class RefineConfig:
    mean_threshold: float = 0.05
    affected_fraction: float = 0.02
    max_iterations: int = 5
    epsilon: float = 1e-3
    percentile: float = 90.0
    jump_fraction: float = 0.5

    def __post_init__(self):
        if min(self.mean_threshold, self.affected_fraction, self.epsilon) <= 0 or self.max_iterations < 0:
            raise ValueError("refinement thresholds must be positive")

    def to_dict(self):
        return dict(self.__dict__)


def jump_points(disc, footprint, percentile=90.0, jump_fraction=0.5):
    """Sub-pixel points where the discrepancy changes sharply inside a footprint.

    Neighbouring pixel pairs (both in the footprint) whose discrepancy
    difference exceeds both the given percentile of nonzero differences and
    ``jump_fraction`` of the largest one contribute the midpoint between
    their centers.
    """
    v = disc.values if isinstance(disc, DiscrepancyMap) else disc
    fp = np.asarray(footprint, dtype=bool)
    dh = np.abs(np.diff(v, axis=1))
    dv = np.abs(np.diff(v, axis=0))
    mh = fp[:, 1:] & fp[:, :-1]
    mv = fp[1:, :] & fp[:-1, :]
    pool = np.concatenate([dh[mh], dv[mv]])
    pool = pool[pool > 0]
    if pool.size == 0:
        return np.zeros((0, 2))
    thr = max(np.percentile(pool, percentile), jump_fraction * pool.max())
    r, c = np.nonzero(mh & (dh >= thr))
    pts_h = np.stack([c + 1.0, r + 0.5], axis=1)
    r, c = np.nonzero(mv & (dv >= thr))
    pts_v = np.stack([c + 0.5, r + 1.0], axis=1)
    return np.concatenate([pts_h, pts_v])


def _tls_line(pts):
    mu = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - mu, full_matrices=False)
    a, b = vt[-1]
    return np.array([a, b, -(a * mu[0] + b * mu[1])])


def ransac_line(pts, rc=None):
    """Line ``(a, b, c)`` with ``a^2 + b^2 = 1`` and its inlier mask, or None."""
    rc = rc or RansacConfig()
    n = len(pts)
    if n < 2:
        return None
    rng = np.random.default_rng(rc.seed)
    best, best_count = None, -1
    for _ in range(rc.iterations):
        i, j = rng.choice(n, size=2, replace=False)
        d = pts[j] - pts[i]
        norm = np.hypot(d[0], d[1])
        if norm == 0:
            continue
        a, b = -d[1] / norm, d[0] / norm
        c = -(a * pts[i, 0] + b * pts[i, 1])
        inl = np.abs(pts @ np.array([a, b]) + c) <= rc.threshold
        count = int(inl.sum())
        if count > best_count:
            best, best_count = inl, count
    if best is None or best_count / n < rc.min_inlier_fraction or best_count < 2:
        return None
    line = _tls_line(pts[best])
    inl = np.abs(pts @ line[:2] + line[2]) <= rc.threshold
    return line, inl


def plane_through_line(line, K, toward=None, id=0, label="wall"):
    """Plane containing the camera center and the rays of image line ``line``.

    With ``toward`` (a pixel position), the normal points to that side.
    """
    a, b, c = line
    n = np.array([K.fx * a, K.fy * b, K.cx * a + K.cy * b + c])
    n /= np.linalg.norm(n)
    if toward is not None:
        r = np.array([(toward[0] - K.cx) / K.fx, (toward[1] - K.cy) / K.fy, 1.0])
        if n @ r < 0:
            n = -n
    return PlaneEq(tuple(float(x) for x in n), 0.0, label, id)


def detect_missing_plane(footprint, disc, K, rc=None, cfg=None, id=0):
    """Hypothesize an occlusion plane inside one offending polygon footprint."""
    cfg = cfg or RefineConfig()
    pts = jump_points(disc, footprint, cfg.percentile, cfg.jump_fraction)
    fit = ransac_line(pts, rc)
    if fit is None:
        return None
    line, _ = fit
    v = disc.values if isinstance(disc, DiscrepancyMap) else disc
    hot = footprint & (v > cfg.mean_threshold)
    toward = None
    if hot.any():
        r, c = np.nonzero(hot)
        toward = (c.mean() + 0.5, r.mean() + 0.5)
    return plane_through_line(line, K, toward, id)


def floor_fallback(walls, camera_height=1.5, id=0, tol=1e-6):
    """Floor from wall normals: mean of cross(n_wall, z) with a consistent
    sign, at ``camera_height`` below the camera (+y is down)."""
    crosses = []
    for w in walls:
        n = w.n if isinstance(w, PlaneEq) else np.asarray(w, dtype=float)
        c = np.cross(n, [0.0, 0.0, 1.0])
        if np.linalg.norm(c) > tol:
            if crosses and c @ crosses[0] < 0:
                c = -c
            crosses.append(c)
    if not crosses:
        raise ValueError("floor fallback is degenerate: no wall gives a usable cross product")
    m = np.mean(crosses, axis=0)
    if np.linalg.norm(m) <= tol:
        raise ValueError("floor fallback is degenerate: cross products cancel")
    m /= np.linalg.norm(m)
    if m[1] < 0:
        m = -m
    return PlaneEq(tuple(float(x) for x in m), float(camera_height), "floor", id)


@dataclass
class Attempt:
    """One candidate-generation / cost / solve pass over a plane set."""

    planes: list
    candidates: object
    masks: dict
    terms: dict
    solution: object
    rendered: np.ndarray | None = None
    labels: np.ndarray | None = None
    disc: DiscrepancyMap | None = None
    seconds: float = 0.0

    @property
    def feasible(self):
        return self.solution is not None

    def key(self):
        return (self.disc.mean if self.disc is not None else 0.0, self.solution.cost)


def solve_planes(K, planes, depth, regions, solve_cfg=None, cand_cfg=None):
    """Candidates, costs and the optimal subset for a working plane set
    (frustum planes are appended here)."""
    t0 = time.perf_counter()
    solve_cfg = solve_cfg or SolveConfig()
    next_id = max(p.id for p in planes) + 1 if planes else 0
    all_planes = list(planes) + frustum_planes(K, first_id=next_id)
    cands = build_candidates(all_planes, K, cand_cfg or CandidateConfig())
    masks = {p.id: rasterize_polygon(p, K) for p in cands.polygons}
    terms = compute_terms(cands.polygons, masks, cands.planes, K, depth, regions)
    sol = solve(cands.polygons, terms, masks, solve_cfg, K.num_pixels)
    att = Attempt(list(planes), cands, masks, terms, sol)
    if sol is not None:
        att.rendered, att.labels = render_layout_depth(sol.polygons, cands.planes, K)
        if depth is not None:
            att.disc = DiscrepancyMap.compute(depth, att.rendered, regions.union)
    att.seconds = time.perf_counter() - t0
    return att


def offending_polygons(att, cfg):
    """(discrepancy sum, polygon) for polygons above the trigger, worst first."""
    out = []
    v = att.disc.values
    for p in att.solution.polygons:
        fp = att.masks[p.id]
        n = int(fp.sum())
        if n == 0:
            continue
        vals = v[fp]
        if vals.mean() > cfg.mean_threshold and np.mean(vals > cfg.mean_threshold) >= cfg.affected_fraction:
            out.append((float(vals.sum()), p))
    out.sort(key=lambda t: (-t[0], t[1].id))
    return out


def refine_loop(K, initial, depth, regions, cfg=None, rc=None, solve_cfg=None, cand_cfg=None):
    """Add occlusion planes while the mean layout discrepancy keeps improving.

    ``initial`` is an Attempt. Returns ``(best attempt, trace)`` where the
    best attempt minimizes (discrepancy, cost) among accepted solutions.
    """
    cfg = cfg or RefineConfig()
    rc = rc or RansacConfig()
    trace = []
    current = initial
    if depth is None or current.solution is None:
        return current, trace
    for it in range(cfg.max_iterations):
        bad = offending_polygons(current, cfg)
        if not bad:
            break
        _, worst = bad[0]
        new_id = max(current.candidates.planes) + 1
        plane = detect_missing_plane(current.masks[worst.id], current.disc, K, rc, cfg, new_id)
        rec = {"iteration": it + 1, "polygon": int(worst.id), "polygon_plane": int(worst.plane),
               "discrepancy_before": current.disc.mean}
        if plane is None:
            rec.update(added_plane=None, accepted=False, reason="no line found")
            trace.append(rec)
            break
        nxt = solve_planes(K, current.planes + [plane], depth, regions, solve_cfg, cand_cfg)
        rec["added_plane"] = plane.to_dict()
        if nxt.solution is None:
            rec.update(accepted=False, reason="infeasible after adding plane")
            trace.append(rec)
            break
        rec.update(discrepancy_after=nxt.disc.mean, cost=nxt.solution.cost)
        if nxt.disc.mean < current.disc.mean - cfg.epsilon:
            rec["accepted"] = True
            trace.append(rec)
            current = nxt
        else:
            rec.update(accepted=False, reason="no improvement")
            trace.append(rec)
            break
    return current, trace


__all__ = ["fill_depth_holes", "DiscrepancyMap", "RansacConfig", "RefineConfig", "jump_points",
           "ransac_line", "plane_through_line", "detect_missing_plane", "floor_fallback",
           "Attempt", "solve_planes", "offending_polygons", "refine_loop"]
