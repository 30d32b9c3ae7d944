import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from planelayout.geometry import (
    CameraIntrinsics, DegeneracyThresholds, PlaneEq, backproject, fit_plane_to_region,
    frustum_planes, intersect_three_planes, project_point, to_chart,
)


def plane(n, d, id=0, label="wall"):
    return PlaneEq.make(n, d, label, id, orient=False)


def test_intersect_axis_aligned():
    X = intersect_three_planes(plane((1, 0, 0), 0), plane((0, 1, 0), 0, 1), plane((0, 0, 1), 1, 2))
    np.testing.assert_allclose(X, [0, 0, 1], atol=1e-12)


def test_intersect_near_parallel_absent():
    t = math.radians(0.1)
    X = intersect_three_planes(plane((0, 0, 1), 1), plane((0, math.sin(t), math.cos(t)), 2, 1),
                               plane((1, 0, 0), 0, 2))
    assert X is None


def test_intersect_pencil_absent():
    X = intersect_three_planes(plane((1, 0, 0), 1), plane((0, 1, 0), 2, 1), plane((1, 1, 0), 3, 2))
    assert X is None


def test_intersect_thresholds_configurable():
    t = math.radians(1.0)
    ps = (plane((0, 0, 1), 1), plane((0, math.sin(t), math.cos(t)), 2, 1), plane((1, 0, 0), 0, 2))
    assert intersect_three_planes(*ps) is None
    X = intersect_three_planes(*ps, DegeneracyThresholds(parallel_deg=0.5, min_det=1e-8))
    assert X is not None
    for p in ps:
        assert abs(p.signed_distance(X)) < 1e-9


def test_project_examples(K100):
    np.testing.assert_allclose(project_point(K100, (0, 0, 2)), [50, 50])
    np.testing.assert_allclose(project_point(K100, (1, 0, 2)), [100, 50])
    assert project_point(K100, (0, 0, -1)) is None


def test_backproject_examples(K100):
    np.testing.assert_allclose(backproject(K100, (50, 50), 2), [0, 0, 2])
    np.testing.assert_allclose(backproject(K100, (100, 50), 2), [1, 0, 2])
    with pytest.raises(ValueError):
        backproject(K100, (1, 1), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 150), st.floats(-50, 150), st.floats(0.01, 100))
def test_backproject_roundtrip(u, v, d):
    K = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
    px = project_point(K, backproject(K, (u, v), d))
    assert abs(px[0] - u) < 1e-9 and abs(px[1] - v) < 1e-9


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 0, 0, 10, 10)
    with pytest.raises(ValueError):
        CameraIntrinsics(1.0, 1.0, 0, 0, 0, 10)
    K = CameraIntrinsics(1.0, 2.0, 3.0, 4.0, 5, 6)
    assert CameraIntrinsics.from_dict(K.to_dict()) == K
    assert K.shape == (6, 5) and K.num_pixels == 30


def test_plane_make_orients_positive():
    p = PlaneEq.make((0, 0, -2), -4, "wall", 3)
    assert p.normal == (0.0, 0.0, 1.0) and p.offset == 2.0
    with pytest.raises(ValueError):
        PlaneEq((1.0, 1.0, 0.0), 1.0, "wall", 0)
    with pytest.raises(ValueError):
        PlaneEq((1.0, 0.0, 0.0), 1.0, "window", 0)


def _plane_depth_image(K, n, d):
    rays = K.pixel_rays()
    return d / (rays @ np.asarray(n, dtype=float))


def test_fit_plane_exact(K100):
    depth = np.full(K100.shape, 2.0)
    p = fit_plane_to_region(K100, depth, np.ones(K100.shape, bool))
    np.testing.assert_allclose(np.abs(p.n), [0, 0, 1], atol=1e-6)
    assert abs(p.offset - 2.0) < 1e-6


def test_fit_plane_tilted(K100):
    n = np.array([0.2, -0.3, 1.0])
    n /= np.linalg.norm(n)
    depth = _plane_depth_image(K100, n, 3.0)
    p = fit_plane_to_region(K100, depth, np.ones(K100.shape, bool), "floor", 7)
    assert p.label == "floor" and p.id == 7
    np.testing.assert_allclose(p.n, n, atol=1e-9)
    assert abs(p.offset - 3.0) < 1e-9


def test_fit_plane_noise_matches_lstsq_oracle(K100, rng):
    offs = []
    for _ in range(20):
        depth = 2.0 + rng.normal(0, 0.01, K100.shape)
        p = fit_plane_to_region(K100, depth, np.ones(K100.shape, bool))
        assert abs(p.offset - 2.0) < 0.01
        # ordinary least squares z = a x + b y + c on the same points
        rows, cols = np.nonzero(np.ones(K100.shape, bool))
        d = depth[rows, cols]
        x = (cols + 0.5 - 50) * d / 100
        y = (rows + 0.5 - 50) * d / 100
        A = np.stack([x, y, np.ones_like(x)], axis=1)
        coef = np.linalg.lstsq(A, d, rcond=None)[0]
        n = np.array([-coef[0], -coef[1], 1.0])
        offs.append((p.offset, coef[2] / np.linalg.norm(n)))
    offs = np.array(offs)
    assert np.max(np.abs(offs[:, 0] - offs[:, 1])) < 5e-3


def test_fit_plane_small_support(K100):
    mask = np.zeros(K100.shape, bool)
    mask[0, :10] = True
    assert fit_plane_to_region(K100, np.full(K100.shape, 2.0), mask) is None


def test_frustum_planes(K100, rng):
    fr = frustum_planes(K100)
    assert len(fr) == 4 and all(p.offset == 0 and p.label == "frustum" for p in fr)
    left = fr[0]
    for v in np.linspace(0, 100, 7):
        for d in (0.5, 2.0, 10.0):
            assert abs(left.signed_distance(backproject(K100, (0.0, v), d))) < 1e-12
    for _ in range(200):
        u, v = rng.uniform(0.01, 99.99, 2)
        X = backproject(K100, (u, v), rng.uniform(0.1, 10))
        assert all(p.signed_distance(X) > 0 for p in fr)


def test_chart_is_isometric(rng):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    pts = rng.normal(size=(6, 3))
    pts -= np.outer(pts @ n, n)
    c = to_chart(pts, n)
    d3 = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    d2 = np.linalg.norm(c[:, None] - c[None], axis=2)
    np.testing.assert_allclose(d2, d3, atol=1e-12)
