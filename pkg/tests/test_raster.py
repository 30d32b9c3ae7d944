from types import SimpleNamespace

import numpy as np
from hypothesis import given, settings, strategies as st

from planelayout.geometry import CameraIntrinsics, PlaneEq
from planelayout.raster import (
    PartitionTolerance, partition_check, partition_report, plane_depth, rasterize_pixels,
    render_layout_depth,
)

FULL = np.array([[0, 0], [100, 0], [100, 100], [0, 100]], float)


def poly(id, pixels, plane=0):
    return SimpleNamespace(id=id, plane=plane, pixels=np.asarray(pixels, float))


def test_full_frame(backend, K100):
    assert rasterize_pixels(FULL, K100).all()


def test_square_area(backend, K100):
    sq = [[10, 10], [20, 10], [20, 20], [10, 20]]
    m = rasterize_pixels(sq, K100)
    assert m.sum() == 100 and m[10:20, 10:20].all()


def test_convex_area_vs_shoelace(backend, K100, rng):
    for _ in range(50):
        ang = np.sort(rng.uniform(0, 2 * np.pi, rng.integers(3, 10)))
        c = rng.uniform(30, 70, 2)
        r = rng.uniform(5, 30)
        pts = np.stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)], 1)
        x, y = pts[:, 0], pts[:, 1]
        area = 0.5 * abs(x @ np.roll(y, -1) - np.roll(x, -1) @ y)
        per = np.linalg.norm(pts - np.roll(pts, -1, 0), axis=1).sum()
        assert abs(rasterize_pixels(pts, K100).sum() - area) <= per


def test_uniform_depth(backend, K100):
    planes = {0: PlaneEq.make((0, 0, 1), 2.0, "wall", 0)}
    d, lab = render_layout_depth([poly(0, FULL)], planes, K100)
    assert np.all(d == 2.0) and np.all(lab == 0)


def test_random_planes_match_analytic(backend, rng):
    K = CameraIntrinsics(180.0, 170.0, 61.3, 47.9, 128, 96)
    full = [[0, 0], [128, 0], [128, 96], [0, 96]]
    worst = 0.0
    for _ in range(50):
        n = rng.normal(size=3)
        n[2] = abs(n[2]) + 1.0
        n /= np.linalg.norm(n)
        p = PlaneEq(tuple(n), float(rng.uniform(0.5, 5)), "wall", 0)
        d, _ = render_layout_depth([poly(0, full)], {0: p}, K)
        for j in range(0, 96, 7):
            for i in range(0, 128, 5):
                r = np.array([(i + 0.5 - K.cx) / K.fx, (j + 0.5 - K.cy) / K.fy, 1.0])
                t = p.offset / (n @ r)
                if t > 0:
                    worst = max(worst, abs(d[j, i] - t))
    assert worst <= 1e-6


def test_zbuffer_nearest_and_ties(backend, K100):
    planes = {0: PlaneEq.make((0, 0, 1), 1.0, "wall", 0), 1: PlaneEq.make((0, 0, 1), 2.0, "wall", 1)}
    a = poly(5, [[0, 0], [60, 0], [60, 100], [0, 100]], plane=1)
    b = poly(7, [[40, 0], [100, 0], [100, 100], [40, 100]], plane=0)
    d, lab = render_layout_depth([a, b], planes, K100)
    assert np.all(lab[:, 40:60] == 7) and np.all(d[:, 40:60] == 1.0)
    d2, lab2 = render_layout_depth([b, a], planes, K100)
    assert np.array_equal(d, d2) and np.array_equal(lab, lab2)
    # equal depth: the smaller polygon id wins whatever the order
    c = poly(3, [[40, 0], [100, 0], [100, 100], [40, 100]], plane=1)
    for order in ([a, c], [c, a]):
        _, lab3 = render_layout_depth(order, planes, K100)
        assert np.all(lab3[:, 40:60] == 3)


def test_near_parallel_pixels_invalid(backend):
    K = CameraIntrinsics(100.0, 100.0, 50.0, 50.5, 100, 100)
    p = PlaneEq.make((0, 1, 0), 1.0, "floor", 0)
    d, lab = render_layout_depth([poly(0, FULL)], {0: p}, K)
    assert np.all(d[50] == 0) and np.all(lab[50] == -1)
    assert np.all(d[51:] > 0) and np.all(plane_depth(p, K)[50] == 0)


def test_depth_equals_plane_on_labels(backend, K100, rng):
    planes, polys = {}, []
    for k in range(4):
        n = rng.normal(size=3)
        n[2] = abs(n[2]) + 1.0
        planes[k] = PlaneEq.make(n, rng.uniform(1, 4), "wall", k)
        c = rng.uniform(20, 80, 2)
        polys.append(poly(k, c + rng.uniform(-40, 40, (5, 2)), plane=k))
    d, lab = render_layout_depth(polys, planes, K100)
    for k in range(4):
        m = lab == k
        if m.any():
            assert np.max(np.abs(d[m] - plane_depth(planes[k], K100)[m])) <= 1e-6


def test_partition_examples(backend, K100):
    left = poly(0, [[0, 0], [50, 0], [50, 100], [0, 100]])
    right = poly(1, [[50, 0], [100, 0], [100, 100], [50, 100]])
    r = partition_check([left, right], K100)
    assert r.is_partition and r.overlap_fraction == 0 and r.coverage_fraction == 1
    r = partition_check([left], K100)
    assert not r.is_partition and abs(r.coverage_fraction - 0.5) < 1e-12
    r = partition_check([poly(0, FULL), poly(1, FULL)], K100)
    assert not r.is_partition and abs(r.overlap_fraction - 1.0) < 1e-12
    assert not partition_report([], 100).is_partition


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 120), st.floats(-20, 120), st.floats(0, 100), st.floats(0, 100))
def test_shared_edge_tiles_exactly(x0, x1, y0, y1):
    K = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
    # cut the frame along the segment (x0, 0) - (x1, 100)
    a = [[-1, -1], [x0, -1], [x1, 101], [-1, 101]]
    b = [[x0, -1], [101, -1], [101, 101], [x1, 101]]
    ma, mb = rasterize_pixels(a, K), rasterize_pixels(b, K)
    assert not (ma & mb).any() and (ma | mb).all()
    # a generic interior edge shared by two triangles
    p, q = np.array([x0 * 0.7 + 3, y0]), np.array([x1 * 0.6 + 10, y1 + 0.5])
    d = q - p
    if np.hypot(*d) < 1e-3:
        return
    nrm = np.array([-d[1], d[0]]) / np.hypot(*d)
    mid = (p + q) / 2
    t1 = [p, q, mid + 30 * nrm]
    t2 = [q, p, mid - 30 * nrm]
    m1, m2 = rasterize_pixels(t1, K), rasterize_pixels(t2, K)
    assert not (m1 & m2).any()


def test_coverage_monotone(K100, rng):
    masks = []
    last = 0.0
    for _ in range(6):
        c = rng.uniform(0, 100, 2)
        masks.append(rasterize_pixels(c + rng.uniform(-30, 30, (4, 2)), K100))
        cov = partition_report(masks, K100.num_pixels, PartitionTolerance()).coverage_fraction
        assert cov >= last
        last = cov
