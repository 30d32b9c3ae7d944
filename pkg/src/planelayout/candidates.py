"""Candidate corners, edges and polygons from a set of planes.

Corners are triple-plane intersections, edges join corners sharing exactly
two planes, and polygons are simple closed loops of edges on one plane.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import DegeneracyThresholds, intersect_three_planes, project_point, to_chart

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CornerCandidate:
    id: int
    planes: tuple  # sorted plane ids
    point: np.ndarray
    pixel: np.ndarray


@dataclass(frozen=True)
class EdgeCandidate:
    id: int
    corners: tuple  # (smaller id, larger id)
    shared_planes: tuple


@dataclass
class PolygonCandidate:
    id: int
    plane: int
    loop: tuple
    edges: tuple
    points: np.ndarray  # (n, 3) corner points in loop order
    pixels: np.ndarray  # (n, 2) projected corners
    area_px: int | None = None


@dataclass(frozen=True)
class EnumerationWarning:
    plane_id: int
    message: str


@dataclass(frozen=True)
class CandidateConfig:
    degeneracy: DegeneracyThresholds = DegeneracyThresholds()
    min_corner_depth: float = 0.05
    pixel_slack: float = 0.5
    merge_tol: float = 1e-4
    max_cycles: int = 512
    max_vertices: int = 16

    def __post_init__(self):
        if self.max_cycles < 1 or self.max_vertices < 3 or self.pixel_slack < 0:
            raise ValueError("invalid candidate configuration")


@dataclass
class CandidateSet:
    planes: dict
    corners: list
    edges: list
    polygons: list
    warnings: list = field(default_factory=list)

    def corner(self, cid):
        return self.corners[cid]

    def polygon(self, pid):
        return self.polygons[pid]


def owns_polygons(plane):
    """Frustum planes and planes through the camera center project to lines."""
    return plane.label != "frustum" and not plane.contains_origin(1e-9)


def generate_corners(planes, K, cfg=None):
    cfg = cfg or CandidateConfig()
    planes = sorted(planes, key=lambda p: p.id)
    W, H, s = K.width, K.height, cfg.pixel_slack
    corners = []
    for p1, p2, p3 in itertools.combinations(planes, 3):
        # all three through the camera center: the intersection is the origin
        if p1.contains_origin() and p2.contains_origin() and p3.contains_origin():
            continue
        X = intersect_three_planes(p1, p2, p3, cfg.degeneracy)
        if X is None or X[2] <= cfg.min_corner_depth:
            continue
        px = project_point(K, X)
        if px is None or not (-s <= px[0] <= W + s and -s <= px[1] <= H + s):
            continue
        if any(np.linalg.norm(c.point - X) < cfg.merge_tol for c in corners):
            continue
        corners.append(CornerCandidate(len(corners), (p1.id, p2.id, p3.id), X, px))
    return corners


def generate_edges(corners):
    edges = []
    corners = sorted(corners, key=lambda c: c.id)
    for a, b in itertools.combinations(corners, 2):
        shared = set(a.planes) & set(b.planes)
        if len(shared) == 2:
            edges.append(EdgeCandidate(len(edges), (a.id, b.id), tuple(sorted(shared))))
    return edges


def _orient(ax, ay, bx, by, cx, cy, eps):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return 0 if -eps <= v <= eps else (1 if v > 0 else -1)


def _on_seg(ax, ay, bx, by, cx, cy, eps):
    return ((ax if ax < bx else bx) - eps <= cx <= (bx if ax < bx else ax) + eps
            and (ay if ay < by else by) - eps <= cy <= (by if ay < by else ay) + eps)


def _segments_intersect(p1, p2, q1, q2, eps=1e-12):
    """Closed-segment intersection test (touching counts)."""
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = p1, p2, q1, q2
    # bounding boxes first, most pairs are far apart
    if (max(ax, bx) + eps < min(cx, dx) or max(cx, dx) + eps < min(ax, bx)
            or max(ay, by) + eps < min(cy, dy) or max(cy, dy) + eps < min(ay, by)):
        return False
    o1 = _orient(ax, ay, bx, by, cx, cy, eps)
    o2 = _orient(ax, ay, bx, by, dx, dy, eps)
    o3 = _orient(cx, cy, dx, dy, ax, ay, eps)
    o4 = _orient(cx, cy, dx, dy, bx, by, eps)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and _on_seg(ax, ay, bx, by, cx, cy, eps):
        return True
    if o2 == 0 and _on_seg(ax, ay, bx, by, dx, dy, eps):
        return True
    if o3 == 0 and _on_seg(cx, cy, dx, dy, ax, ay, eps):
        return True
    if o4 == 0 and _on_seg(cx, cy, dx, dy, bx, by, eps):
        return True
    return False


def is_simple_loop(pts2d):
    """True if no two non-adjacent edges of the closed loop touch and the
    loop encloses nonzero area."""
    pts2d = np.asarray(pts2d, dtype=float)
    n = len(pts2d)
    if n < 3:
        return False
    x, y = pts2d[:, 0], pts2d[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    scale = max(np.ptp(x), np.ptp(y), 1e-12)
    if area <= 1e-12 * scale * scale:
        return False
    pts = [tuple(p) for p in pts2d.tolist()]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


def _canonical(loop):
    k = loop.index(min(loop))
    fwd = loop[k:] + loop[:k]
    rev = (fwd[0],) + tuple(reversed(fwd[1:]))
    return min(fwd, rev)


def _plane_cycles(plane, plane_corners, edge_of, planes, cfg):
    """Simple cycles of the per-plane corner graph, as canonical loops.

    The graph joins consecutive corners along each line where ``plane``
    meets another plane, so every loop lists all corners on its boundary.
    """
    n_p = plane.n
    adj = {c.id: set() for c in plane_corners}
    by_line = {}
    for c in plane_corners:
        for q in c.planes:
            if q != plane.id:
                by_line.setdefault(q, []).append(c)
    for q, cs in by_line.items():
        if len(cs) < 2:
            continue
        direction = np.cross(n_p, planes[q].n)
        cs = sorted(cs, key=lambda c: (float(c.point @ direction), c.id))
        for a, b in zip(cs, cs[1:]):
            if (min(a.id, b.id), max(a.id, b.id)) in edge_of:
                adj[a.id].add(b.id)
                adj[b.id].add(a.id)

    chart = {c.id: tuple(float(v) for v in to_chart(c.point, n_p)) for c in plane_corners}
    order = sorted(adj)

    def crosses(path, nxt, closing):
        a, b = chart[path[-1]], chart[nxt]
        # path edges not adjacent to the new edge
        for k in range(1 if closing else 0, len(path) - 2):
            if _segments_intersect(chart[path[k]], chart[path[k + 1]], a, b):
                return True
        return False

    def dfs(start, path, on_path, length, out):
        """Cycles of exactly ``length`` vertices through ``start``; returns
        True if some path was cut by the length bound."""
        cut = False
        for nxt in sorted(adj[path[-1]]):
            if nxt == start:
                if len(path) == length and not crosses(path, nxt, closing=True):
                    out.add(_canonical(tuple(path)))
            elif nxt > start and nxt not in on_path:
                if len(path) == length:
                    cut = True
                    continue
                if crosses(path, nxt, closing=False):
                    continue
                path.append(nxt)
                on_path.add(nxt)
                cut |= dfs(start, path, on_path, length, out)
                on_path.discard(nxt)
                path.pop()
        return cut

    # shortest loops first so the cap keeps the simplest shapes
    found = []
    for length in range(3, cfg.max_vertices + 1):
        loops, cut = set(), False
        for s in order:
            cut |= dfs(s, [s], {s}, length, loops)
        for loop in sorted(loops):
            if is_simple_loop(np.array([chart[c] for c in loop])):
                found.append(loop)
                if len(found) >= cfg.max_cycles:
                    return found, True
        if not cut:
            break
    return found, False


def generate_polygons(corners, edges, planes, K, cfg=None):
    """Candidate polygons for every plane that can own one.

    Returns ``(polygons, warnings)``; a warning is emitted for each plane whose
    cycle enumeration hit ``cfg.max_cycles``.
    """
    cfg = cfg or CandidateConfig()
    plane_map = {p.id: p for p in planes}
    edge_of = {e.corners: e.id for e in edges}
    polys, warns = [], []
    for pid in sorted(plane_map):
        plane = plane_map[pid]
        if not owns_polygons(plane):
            continue
        pc = [c for c in corners if pid in c.planes]
        if len(pc) < 3:
            continue
        loops, overflow = _plane_cycles(plane, pc, edge_of, plane_map, cfg)
        if overflow:
            w = EnumerationWarning(pid, f"cycle enumeration capped at {cfg.max_cycles}")
            log.warning("plane %d: %s", pid, w.message)
            warns.append(w)
        cmap = {c.id: c for c in corners}
        for loop in loops:
            n = len(loop)
            eids = tuple(edge_of[(min(loop[k], loop[(k + 1) % n]), max(loop[k], loop[(k + 1) % n]))]
                         for k in range(n))
            pts = np.array([cmap[c].point for c in loop])
            pix = np.array([cmap[c].pixel for c in loop])
            polys.append(PolygonCandidate(len(polys), pid, loop, eids, pts, pix))
    return polys, warns


def build_candidates(planes, K, cfg=None):
    cfg = cfg or CandidateConfig()
    corners = generate_corners(planes, K, cfg)
    edges = generate_edges(corners)
    polygons, warns = generate_polygons(corners, edges, planes, K, cfg)
    return CandidateSet({p.id: p for p in planes}, corners, edges, polygons, warns)
