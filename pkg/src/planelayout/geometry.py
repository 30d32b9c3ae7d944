"""Camera model, oriented planes and the low-level geometric primitives.

Camera frame: x right, y down, z forward (optical axis). Pixel ``(u, v)`` uses
continuous coordinates where pixel ``(i, j)`` covers ``[i, i+1) x [j, j+1)``,
so its center is at ``(i + 0.5, j + 0.5)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

LABELS = ("wall", "floor", "ceiling", "frustum")

Z_MIN = 1e-4


@functools.lru_cache(maxsize=8)
def _pixel_rays(fx, fy, cx, cy, width, height):
    u = ((np.arange(width) + 0.5) - cx) / fx
    v = ((np.arange(height) + 0.5) - cy) / fy
    rays = np.empty((height, width, 3))
    rays[..., 0] = u[None, :]
    rays[..., 1] = v[:, None]
    rays[..., 2] = 1.0
    rays.flags.writeable = False
    return rays


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 2 or self.height < 2:
            raise ValueError("image must be at least 2x2")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def num_pixels(self):
        return self.width * self.height

    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def pixel_rays(self):
        """Rays ``(x/z, y/z, 1)`` through every pixel center, shape (H, W, 3).
        The array is cached and read-only."""
        return _pixel_rays(self.fx, self.fy, self.cx, self.cy, self.width, self.height)

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class PlaneEq:
    """Plane ``normal . X = offset`` with a unit normal.

    Layout planes are oriented so that ``offset > 0`` (the normal points away
    from the camera). Frustum planes and planes added by refinement contain
    the camera center and have ``offset == 0``.
    """

    normal: tuple
    offset: float
    label: str
    id: int

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.all(np.isfinite(n)):
            raise ValueError("normal must be a finite 3-vector")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError(f"plane {self.id}: normal is not unit length")
        if self.label not in LABELS:
            raise ValueError(f"unknown plane label {self.label!r}")
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "id", int(self.id))

    @property
    def n(self):
        return np.array(self.normal)

    def signed_distance(self, points):
        return np.asarray(points, dtype=float) @ self.n - self.offset

    def contains_origin(self, tol=1e-9):
        return abs(self.offset) <= tol

    def to_dict(self):
        return {"id": self.id, "normal": list(self.normal), "offset": self.offset,
                "label": self.label}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(float(x) for x in d["normal"]), float(d["offset"]),
                   d["label"], int(d["id"]))

    @classmethod
    def make(cls, normal, offset, label, id, orient=True):
        """Normalize ``normal`` (scaling ``offset`` along) and optionally flip
        so the offset is non-negative."""
        n = np.asarray(normal, dtype=float)
        s = np.linalg.norm(n)
        if s == 0:
            raise ValueError("zero normal")
        n, d = n / s, float(offset) / s
        if orient and d < 0:
            n, d = -n, -d
        return cls(tuple(n), d, label, id)


@dataclass(frozen=True)
class DegeneracyThresholds:
    parallel_deg: float = 2.0
    min_det: float = 1e-4


def intersect_three_planes(p1, p2, p3, cond_limits=None):
    """Unique common point of three planes, or None when degenerate."""
    lim = cond_limits or DegeneracyThresholds()
    normals = np.array([p1.normal, p2.normal, p3.normal])
    cos_lim = np.cos(np.radians(lim.parallel_deg))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        if abs(normals[a] @ normals[b]) > cos_lim:
            return None
    if abs(np.linalg.det(normals)) < lim.min_det:
        return None
    rhs = np.array([p1.offset, p2.offset, p3.offset])
    return np.linalg.solve(normals, rhs)


def project_point(K, p, z_min=Z_MIN):
    x, y, z = (float(c) for c in p)
    if z <= z_min:
        return None
    return np.array([K.fx * x / z + K.cx, K.fy * y / z + K.cy])


def project_points(K, points):
    """Vectorized projection; no depth check."""
    pts = np.asarray(points, dtype=float)
    z = pts[..., 2]
    return np.stack([K.fx * pts[..., 0] / z + K.cx, K.fy * pts[..., 1] / z + K.cy], axis=-1)


def backproject(K, px, depth):
    if not depth > 0:
        raise ValueError("depth must be positive")
    u, v = px
    return np.array([(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, float(depth)])


def backproject_map(K, depth, mask=None):
    """3D points (N, 3) for the valid pixels of a depth map, optionally masked."""
    valid = np.isfinite(depth) & (depth > 0)
    if mask is not None:
        valid &= mask
    rows, cols = np.nonzero(valid)
    d = depth[rows, cols]
    x = ((cols + 0.5) - K.cx) * d / K.fx
    y = ((rows + 0.5) - K.cy) * d / K.fy
    return np.stack([x, y, d], axis=1)


def _tls_plane(points):
    centroid = points.mean(axis=0)
    centered = points - centroid
    # smallest right singular vector of the centered cloud
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    return normal, float(normal @ centroid)


@dataclass(frozen=True)
class PlaneFitConfig:
    min_support: int = 50
    mad_factor: float = 2.0
    max_rms: float = 0.05


def fit_plane_to_region(K, depth, mask, label="wall", id=0, cfg=None):
    """Total-least-squares plane through the backprojected masked depth.

    One trimming pass drops points further than ``mad_factor`` scaled MADs
    from the median residual, then the plane is refitted. Returns None when
    support is too small or the trimmed fit is not planar enough.
    """
    cfg = cfg or PlaneFitConfig()
    pts = backproject_map(K, depth, mask)
    if len(pts) < cfg.min_support:
        return None
    normal, offset = _tls_plane(pts)
    resid = pts @ normal - offset
    med = np.median(resid)
    mad = 1.4826 * np.median(np.abs(resid - med))
    keep = np.abs(resid - med) <= max(cfg.mad_factor * mad, 1e-12)
    if keep.sum() >= cfg.min_support and not keep.all():
        pts = pts[keep]
        normal, offset = _tls_plane(pts)
    rms = float(np.sqrt(np.mean((pts @ normal - offset) ** 2)))
    if rms > cfg.max_rms:
        return None
    return PlaneEq.make(normal, offset, label, id)


def frustum_planes(K, first_id=0):
    """Four planes through the camera center and neighbouring image corners,
    normals pointing into the visible volume. Order: left, top, right, bottom."""
    W, H = K.width, K.height
    corners = [backproject(K, (u, v), 1.0) for u, v in ((0, 0), (W, 0), (W, H), (0, H))]
    inside = backproject(K, (W / 2.0, H / 2.0), 1.0)
    planes = []
    # (bottom-left -> top-left) is the left border, then clockwise
    pairs = ((corners[3], corners[0]), (corners[0], corners[1]),
             (corners[1], corners[2]), (corners[2], corners[3]))
    for k, (a, b) in enumerate(pairs):
        n = np.cross(a, b)
        n /= np.linalg.norm(n)
        if n @ inside < 0:
            n = -n
        planes.append(PlaneEq(tuple(n), 0.0, "frustum", first_id + k))
    return planes


def plane_chart(normal):
    """Orthonormal in-plane basis (e1, e2) for a unit normal."""
    n = np.asarray(normal, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    e1 = np.cross(n, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def to_chart(points, normal):
    e1, e2 = plane_chart(normal)
    pts = np.asarray(points, dtype=float)
    return np.stack([pts @ e1, pts @ e2], axis=-1)
