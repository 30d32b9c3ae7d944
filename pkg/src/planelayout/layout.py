"""Structured layout: planes, shared corners and edges, polygons.

Corner identity is the unordered plane-id triple, edge identity the pair of
corner identities; coordinates are derived data.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .geometry import PlaneEq, project_points, to_chart
from .raster import render_layout_depth


@dataclass(frozen=True)
class LayoutCorner:
    id: int
    planes: tuple
    point: tuple


@dataclass(frozen=True)
class LayoutEdge:
    id: int
    corners: tuple
    planes: tuple


@dataclass(frozen=True)
class LayoutPolygon:
    id: int
    plane: int
    corner_loop: tuple


@dataclass
class Layout:
    planes: list
    corners: list
    edges: list
    polygons: list
    trace: dict = field(default_factory=dict)

    def plane_map(self):
        return {p.id: p for p in self.planes}

    def corner_points(self, poly):
        return np.array([self.corners[c].point for c in poly.corner_loop])

    def polygon_edges(self, poly):
        """Edge ids of a polygon's boundary in loop order."""
        lookup = {e.corners: e.id for e in self.edges}
        loop = poly.corner_loop
        n = len(loop)
        return [lookup[tuple(sorted((loop[k], loop[(k + 1) % n])))] for k in range(n)]

    def projected(self, K):
        """Polygon id -> (n, 2) pixel coordinates of its corner loop."""
        return {p.id: project_points(K, self.corner_points(p)) for p in self.polygons}

    def render(self, K):
        """Depth and label maps (labels are layout polygon ids)."""
        pix = self.projected(K)
        polys = [SimpleNamespace(id=p.id, plane=p.plane, pixels=pix[p.id]) for p in self.polygons]
        return render_layout_depth(polys, self.plane_map(), K)

    def to_dict(self):
        return {
            "planes": [p.to_dict() for p in self.planes],
            "corners": [{"id": c.id, "planes": list(c.planes), "point": list(c.point)}
                        for c in self.corners],
            "edges": [{"id": e.id, "corners": list(e.corners), "planes": list(e.planes)}
                      for e in self.edges],
            "polygons": [{"id": p.id, "plane": p.plane, "corner_loop": list(p.corner_loop)}
                         for p in self.polygons],
            "trace": self.trace,
        }

    @classmethod
    def from_dict(cls, d):
        layout = cls(
            [PlaneEq.from_dict(p) for p in d["planes"]],
            [LayoutCorner(int(c["id"]), tuple(c["planes"]), tuple(float(x) for x in c["point"]))
             for c in d["corners"]],
            [LayoutEdge(int(e["id"]), tuple(e["corners"]), tuple(e["planes"])) for e in d["edges"]],
            [LayoutPolygon(int(p["id"]), int(p["plane"]), tuple(p["corner_loop"]))
             for p in d["polygons"]],
            d.get("trace", {}),
        )
        validate_layout(layout)
        return layout


class TopologyError(RuntimeError):
    pass


def validate_layout(layout, tol=1e-6):
    planes = layout.plane_map()
    for i, c in enumerate(layout.corners):
        if c.id != i:
            raise TopologyError("corner ids must be 0..n-1 in order")
        for pid in c.planes:
            if abs(planes[pid].signed_distance(c.point)) > tol:
                raise TopologyError(f"corner {c.id} is off plane {pid}")
    keys = {e.corners for e in layout.edges}
    if len(keys) != len(layout.edges):
        raise TopologyError("duplicate edge")
    for e in layout.edges:
        if any(not 0 <= c < len(layout.corners) for c in e.corners):
            raise TopologyError(f"edge {e.id} references a missing corner")
    for p in layout.polygons:
        loop = p.corner_loop
        for k in range(len(loop)):
            if tuple(sorted((loop[k], loop[(k + 1) % len(loop)]))) not in keys:
                raise TopologyError(f"polygon {p.id} uses a missing edge")


def build_layout(solution, candidates, trace=None, tol=1e-6):
    """Deduplicate corners and edges of the chosen polygons by plane identity."""
    polys = sorted(solution.polygons, key=lambda p: (p.plane, p.id))
    cand_corners = {c.id: c for c in candidates.corners}
    corner_key = {}
    points = {}
    for poly in polys:
        for cid in poly.loop:
            c = cand_corners[cid]
            key = tuple(sorted(c.planes))
            if key in points and np.linalg.norm(points[key] - c.point) > tol:
                raise TopologyError(f"corner {key} has inconsistent coordinates")
            points.setdefault(key, c.point)
    for i, key in enumerate(sorted(points)):
        corner_key[key] = i
    corners = [LayoutCorner(i, key, tuple(float(x) for x in points[key]))
               for key, i in sorted(corner_key.items(), key=lambda kv: kv[1])]

    edge_ids = {}
    out_polys = []
    for k, poly in enumerate(polys):
        loop = tuple(corner_key[tuple(sorted(cand_corners[c].planes))] for c in poly.loop)
        n = len(loop)
        for j in range(n):
            pair = tuple(sorted((loop[j], loop[(j + 1) % n])))
            edge_ids.setdefault(pair, None)
        out_polys.append(LayoutPolygon(k, poly.plane, loop))
    edges = []
    for i, pair in enumerate(sorted(edge_ids)):
        shared = tuple(sorted(set(corners[pair[0]].planes) & set(corners[pair[1]].planes)))
        if len(shared) != 2:
            raise TopologyError(f"edge {pair} does not share exactly two planes")
        edges.append(LayoutEdge(i, pair, shared))

    used = {pid for c in corners for pid in c.planes} | {p.plane for p in out_polys}
    planes = [candidates.planes[pid] for pid in sorted(used)]
    layout = Layout(planes, corners, edges, out_polys, dict(trace or {}))
    validate_layout(layout, tol)
    return layout


def to_json(layout):
    return json.dumps(layout.to_dict(), indent=1, sort_keys=False) + "\n"


def from_json(text):
    return Layout.from_dict(json.loads(text))


def ear_clip(pts2d):
    """Triangulate a simple polygon; returns index triples into ``pts2d``."""
    pts = np.asarray(pts2d, dtype=float)
    n = len(pts)
    x, y = pts[:, 0], pts[:, 1]
    signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    idx = list(range(n)) if signed > 0 else list(range(n))[::-1]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def inside(p, a, b, c):
        return cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0

    tris = []
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if cross(a, b, c) <= 0:
                continue
            if any(inside(pts[j], a, b, c) for j in idx if j not in (i0, i1, i2)
                   and not (np.allclose(pts[j], a) or np.allclose(pts[j], b) or np.allclose(pts[j], c))):
                continue
            tris.append((i0, i1, i2))
            idx.pop(k)
            break
        else:
            # only degenerate (collinear) ears left
            k = next((k for k in range(m) if abs(cross(pts[idx[k - 1]], pts[idx[k]], pts[idx[(k + 1) % m]])) < 1e-12), None)
            if k is None:
                raise ValueError("polygon is not simple")
            idx.pop(k)
        guard += 1
        if guard > 4 * n:
            raise ValueError("polygon is not simple")
    tris.append(tuple(idx))
    return tris


def to_obj(layout):
    """Wavefront OBJ text, one group per polygon."""
    lines = ["# planelayout mesh"]
    for c in layout.corners:
        lines.append("v " + " ".join(f"{v:.17g}" for v in c.point))
    planes = layout.plane_map()
    for poly in layout.polygons:
        pts = layout.corner_points(poly)
        tris = ear_clip(to_chart(pts, planes[poly.plane].normal))
        lines.append(f"g polygon_{poly.id}")
        for t in tris:
            lines.append("f " + " ".join(str(poly.corner_loop[i] + 1) for i in t))
    return "\n".join(lines) + "\n"


def export_layout(layout, fmt="json"):
    if fmt == "json":
        return to_json(layout).encode()
    if fmt == "mesh":
        return to_obj(layout).encode()
    raise ValueError(f"unknown format {fmt!r}")
