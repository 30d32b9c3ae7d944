import itertools

import numpy as np
import pytest

from planelayout.candidates import (
    CandidateConfig, build_candidates, generate_corners, generate_edges, is_simple_loop,
)
from planelayout.geometry import CameraIntrinsics, PlaneEq, frustum_planes, to_chart

K90 = CameraIntrinsics(50.0, 50.0, 50.0, 50.0, 100, 100)  # 90 degree field of view


def box_planes():
    ps = [PlaneEq.make((1, 0, 0), -1, "wall", 0), PlaneEq.make((1, 0, 0), 1, "wall", 1),
          PlaneEq.make((0, 1, 0), -1, "ceiling", 2), PlaneEq.make((0, 1, 0), 1, "floor", 3),
          PlaneEq.make((0, 0, 1), 3, "wall", 4)]
    return ps + frustum_planes(K90, first_id=5)


# independent oracles ---------------------------------------------------------

def corner_oracle(planes, K):
    out = []
    for trip in itertools.combinations(sorted(planes, key=lambda p: p.id), 3):
        if all(abs(p.offset) < 1e-9 for p in trip):
            continue
        N = np.array([p.normal for p in trip])
        ok = True
        for a, b in itertools.combinations(N, 2):
            ang = np.degrees(np.arccos(min(1.0, abs(a @ b))))
            ok &= ang >= 2.0
        if not ok or abs(np.linalg.det(N)) < 1e-4:
            continue
        X = np.linalg.solve(N, [p.offset for p in trip])
        if X[2] <= 0.05:
            continue
        u, v = K.fx * X[0] / X[2] + K.cx, K.fy * X[1] / X[2] + K.cy
        if not (-0.5 <= u <= K.width + 0.5 and -0.5 <= v <= K.height + 0.5):
            continue
        if any(np.linalg.norm(X - Y) <= 1e-4 for Y in out):
            continue
        out.append(X)
    return out


def neighbour_graph(plane, corners, planes):
    on = [c for c in corners if plane.id in c.planes]
    adj = {c.id: set() for c in on}
    for q in planes:
        if q.id == plane.id:
            continue
        line = [c for c in on if q.id in c.planes]
        d = np.cross(plane.n, q.n)
        line.sort(key=lambda c: c.point @ d)
        for a, b in zip(line, line[1:]):
            if len(set(a.planes) & set(b.planes)) == 2:
                adj[a.id].add(b.id)
                adj[b.id].add(a.id)
    return adj


def all_cycles(adj):
    """Every simple cycle (length >= 3) as a frozenset of undirected edges."""
    found = set()

    def walk(start, path):
        for nxt in adj[path[-1]]:
            if nxt == start and len(path) >= 3:
                found.add(frozenset(frozenset(e) for e in zip(path, path[1:] + [start])))
            elif nxt not in path and nxt > start:
                walk(start, path + [nxt])

    for s in adj:
        walk(s, [s])
    return found


def crosses(a, b, c, d):
    """Proper or touching intersection of closed segments, parametric form."""
    r, s = b - a, d - c
    den = r[0] * s[1] - r[1] * s[0]
    qp = c - a
    if abs(den) < 1e-12:
        if abs(qp[0] * r[1] - qp[1] * r[0]) > 1e-12:
            return False
        rr = r @ r
        t0, t1 = sorted(((c - a) @ r / rr, (d - a) @ r / rr))
        return t1 >= -1e-12 and t0 <= 1 + 1e-12
    t = (qp[0] * s[1] - qp[1] * s[0]) / den
    u = (qp[0] * r[1] - qp[1] * r[0]) / den
    return -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12


def simple_oracle(pts):
    n = len(pts)
    for i in range(n):
        for j in range(n):
            if abs(i - j) <= 1 or {i, j} == {0, n - 1}:
                continue
            if crosses(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


# tests -----------------------------------------------------------------------

def test_box_corners_match_oracle():
    planes = box_planes()
    corners = generate_corners(planes, K90)
    ref = corner_oracle(planes, K90)
    assert len(corners) == len(ref)
    for c in corners:
        assert any(np.linalg.norm(c.point - X) < 1e-9 for X in ref)
        for pid in c.planes:
            p = next(q for q in planes if q.id == pid)
            assert abs(p.signed_distance(c.point)) < 1e-9
        assert -0.5 <= c.pixel[0] <= 100.5 and -0.5 <= c.pixel[1] <= 100.5


def test_single_orthogonal_corner():
    K = CameraIntrinsics(20.0, 20.0, 50.0, 50.0, 100, 100)
    ps = [PlaneEq.make((1, 0, 0), 0.0, "wall", 0, orient=False),
          PlaneEq.make((0, 1, 0), 0.0, "floor", 1, orient=False),
          PlaneEq.make((0, 0, 1), 2.0, "wall", 2)]
    cs = generate_corners(ps, K)
    assert len(cs) == 1 and np.allclose(cs[0].point, [0, 0, 2])
    ps[2] = PlaneEq.make((0, 0, 1), -2.0, "wall", 2, orient=False)
    assert generate_corners(ps, K) == []


def test_edges_definition():
    from planelayout.candidates import CornerCandidate
    A = CornerCandidate(0, (1, 2, 3), np.zeros(3), np.zeros(2))
    B = CornerCandidate(1, (1, 2, 4), np.zeros(3), np.zeros(2))
    C = CornerCandidate(2, (1, 5, 6), np.zeros(3), np.zeros(2))
    es = generate_edges([A, B, C])
    assert [(e.corners, e.shared_planes) for e in es] == [((0, 1), (1, 2))]
    assert generate_edges([]) == []


def test_box_edges_match_pairwise_scan():
    corners = generate_corners(box_planes(), K90)
    edges = generate_edges(corners)
    ref = {(a.id, b.id) for a in corners for b in corners
           if a.id < b.id and len(set(a.planes) & set(b.planes)) == 2}
    assert {e.corners for e in edges} == ref


def test_box_polygons_match_cycle_oracle():
    planes = box_planes()
    cs = build_candidates(planes, K90)
    assert not cs.warnings
    cmap = {c.id: c for c in cs.corners}
    for p in planes:
        got = {frozenset(frozenset((l[k], l[(k + 1) % len(l)])) for k in range(len(l)))
               for l in (q.loop for q in cs.polygons if q.plane == p.id)}
        if p.label == "frustum":
            assert not got
            continue
        adj = neighbour_graph(p, cs.corners, planes)
        expect = set()
        for cyc in all_cycles(adj):
            # order the edge set into a loop
            edges = [tuple(e) for e in cyc]
            loop = list(edges[0])
            while len(loop) < len(edges):
                nxt = next(b if a == loop[-1] else a for a, b in edges
                           if loop[-1] in (a, b) and (b if a == loop[-1] else a) != loop[-2])
                loop.append(nxt)
            pts = to_chart(np.array([cmap[c].point for c in loop]), p.n)
            if simple_oracle(pts):
                expect.add(cyc)
        assert got == expect, p.id


def test_fronto_parallel_quad_unique():
    planes = [PlaneEq.make((0, 0, 1), 3, "wall", 0)] + frustum_planes(K90, first_id=1)
    cs = build_candidates(planes, K90)
    assert len(cs.corners) == 4 and len(cs.edges) == 4
    assert len(cs.polygons) == 1


def test_polygon_points_on_plane_and_simple():
    planes = box_planes()
    cs = build_candidates(planes, K90)
    pm = {p.id: p for p in planes}
    for poly in cs.polygons:
        assert np.abs(pm[poly.plane].signed_distance(poly.points)).max() < 1e-9
        assert simple_oracle(to_chart(poly.points, pm[poly.plane].n))
        assert len(poly.edges) == len(poly.loop)


def test_bowtie_rejected():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert is_simple_loop(sq)
    assert not is_simple_loop(sq[[0, 2, 1, 3]])
    assert not is_simple_loop(np.array([[0, 0], [1, 0], [2, 0]], float))


def test_origin_planes_own_nothing():
    planes = box_planes() + [PlaneEq.make((1, 0, -0.2), 0.0, "wall", 20, orient=False)]
    cs = build_candidates(planes, K90)
    assert all(p.plane != 20 for p in cs.polygons)
    assert any(20 in c.planes for c in cs.corners)


def test_enumeration_cap_warns():
    cs = build_candidates(box_planes(), K90, CandidateConfig(max_cycles=2))
    assert cs.warnings
    for w in cs.warnings:
        assert sum(p.plane == w.plane_id for p in cs.polygons) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        CandidateConfig(max_cycles=0)
