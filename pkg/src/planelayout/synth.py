"""Synthetic rooms: extruded floor plans seen from a level camera.

The camera sits at the origin (x right, y down, z forward). A room is a floor
plan polygon in the (x, z) plane extruded between the floor ``y = cam_height``
and the ceiling ``y = cam_height - ceiling_height``. Ground truth comes from
ray casting the room analytically; the ground-truth Layout is the candidate
polygon set that reproduces the ray-cast label map.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .candidates import build_candidates
from .cost import SegmentationRegions
from .geometry import CameraIntrinsics, PlaneEq, frustum_planes
from .layout import build_layout
from .raster import rasterize_polygon
from .scene_io import SceneInput
from .solver import Solution

PRESETS = {
    "cuboid": [(-2.5, -1.0), (-2.5, 5.5), (3.0, 5.5), (3.0, -1.0)],
    "lshape": [(-2.5, -1.0), (-2.5, 6.5), (1.5, 6.5), (1.5, 3.5), (3.5, 3.5), (3.5, -1.0)],
    "occluded-wall": [(-1.0, -1.0), (-1.0, 3.0), (-3.0, 3.0), (-3.0, 6.0), (3.0, 6.0), (3.0, -1.0)],
    "tshape": [(-1.0, -1.0), (-1.0, 3.0), (-3.5, 3.0), (-3.5, 6.0), (3.5, 6.0), (3.5, 3.0),
               (1.0, 3.0), (1.0, -1.0)],
    "no-floor": [(-2.5, -1.0), (-2.5, 5.5), (3.0, 5.5), (3.0, -1.0)],
}

FLOOR_ID, CEILING_ID = 0, 1


@dataclass(frozen=True)
class Box:
    """Axis-aligned furniture box standing on the floor (plan coordinates)."""

    x0: float
    x1: float
    z0: float
    z1: float
    height: float


@dataclass(frozen=True)
class SynthSpec:
    preset: str = "cuboid"
    width: int = 320
    height: int = 240
    focal: float = 160.0
    cam_height: float = 1.5
    ceiling_height: float = 2.8
    yaw_deg: float = 0.0
    cam_x: float = 0.0
    cam_z: float = 0.0
    plane_angle_std_deg: float = 0.0
    plane_offset_std: float = 0.0
    depth_std: float = 0.0
    erosion_px: int = 0
    dropout: tuple = ()
    furniture: tuple = ()
    holes: int = 0
    seed: int = 0
    mode: str = "rgbd"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.cam_height <= 0 or self.ceiling_height <= self.cam_height:
            raise ValueError("camera must be between floor and ceiling")


def preset_spec(name, **kw):
    """SynthSpec with the preset's built-in degradations (no-floor drops the floor)."""
    extra = {}
    if name == "no-floor":
        extra = {"dropout": ("floor",), "furniture": (Box(-1.5, 0.5, 3.0, 4.2, 0.8),)}
    extra.update(kw)
    return SynthSpec(preset=name, **extra)


@dataclass
class Room:
    plan: np.ndarray  # (n, 2) floor plan vertices (x, z)
    cam_height: float
    ceiling_height: float
    planes: dict = field(default_factory=dict)  # surface id -> PlaneEq
    walls: dict = field(default_factory=dict)  # surface id -> (A, B)

    @property
    def y_floor(self):
        return self.cam_height

    @property
    def y_ceiling(self):
        return self.cam_height - self.ceiling_height


def _rotate_plan(plan, yaw_deg):
    a = np.radians(yaw_deg)
    c, s = np.cos(a), np.sin(a)
    x, z = plan[:, 0], plan[:, 1]
    return np.stack([c * x + s * z, -s * x + c * z], axis=1)


def _inside_plan(plan, x, z):
    """Crossing-number point-in-polygon, vectorized over x, z."""
    inside = np.zeros(np.shape(x), dtype=bool)
    n = len(plan)
    for i in range(n):
        (xa, za), (xb, zb) = plan[i], plan[(i + 1) % n]
        if za == zb:
            continue
        cond = (za > z) != (zb > z)
        xc = xa + (z - za) * (xb - xa) / (zb - za)
        inside ^= cond & (x < xc)
    return inside


def make_room(spec):
    plan = np.array(PRESETS[spec.preset], dtype=float) - [spec.cam_x, spec.cam_z]
    plan = _rotate_plan(plan, spec.yaw_deg)
    if not _inside_plan(plan, np.array(0.0), np.array(0.0)):
        raise ValueError("camera position is outside the room")
    room = Room(plan, spec.cam_height, spec.ceiling_height)
    room.planes[FLOOR_ID] = PlaneEq.make((0, 1, 0), spec.cam_height, "floor", FLOOR_ID)
    room.planes[CEILING_ID] = PlaneEq.make((0, -1, 0), spec.ceiling_height - spec.cam_height,
                                           "ceiling", CEILING_ID)
    n = len(plan)
    for i in range(n):
        a, b = plan[i], plan[(i + 1) % n]
        d = b - a
        normal = np.array([-d[1], 0.0, d[0]])
        offset = normal @ np.array([a[0], 0.0, a[1]])
        if abs(offset) < 1e-9 * np.linalg.norm(normal):
            raise ValueError("a wall passes through the camera center")
        sid = 2 + i
        room.planes[sid] = PlaneEq.make(normal, offset, "wall", sid)
        room.walls[sid] = (a, b)
    return room


def raycast(room, K, boxes=()):
    """Per-pixel layout depth, surface label, and depth including furniture."""
    rays = K.pixel_rays()
    a, b = rays[..., 0], rays[..., 1]
    best = np.full(K.shape, np.inf)
    label = np.full(K.shape, -1, dtype=np.int32)
    eps = 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        for sid, y0 in ((FLOOR_ID, room.y_floor), (CEILING_ID, room.y_ceiling)):
            t = y0 / b
            ok = (t > 0) & np.isfinite(t) & _inside_plan(room.plan, a * t, t)
            upd = ok & (t < best)
            best[upd], label[upd] = t[upd], sid
        for sid, (A, B) in room.walls.items():
            d = B - A
            nx, nz = -d[1], d[0]
            off = nx * A[0] + nz * A[1]
            t = off / (nx * a + nz)
            x, z, y = a * t, t, b * t
            s = ((x - A[0]) * d[0] + (z - A[1]) * d[1]) / (d @ d)
            ok = ((t > 0) & np.isfinite(t) & (s >= -eps) & (s <= 1 + eps)
                  & (y >= room.y_ceiling - eps) & (y <= room.y_floor + eps))
            upd = ok & (t < best)
            best[upd], label[upd] = t[upd], sid
    if (label < 0).any():
        raise RuntimeError("ray cast left pixels without a surface")
    layout_depth = best
    scene_depth = best.copy()
    furniture = np.zeros(K.shape, dtype=bool)
    for box in boxes:
        lo = np.array([box.x0, room.y_floor - box.height, box.z0])
        hi = np.array([box.x1, room.y_floor, box.z1])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = lo[None, None, :] / rays
            t2 = hi[None, None, :] / rays
        tmin = np.nanmax(np.minimum(t1, t2), axis=2)
        tmax = np.nanmin(np.maximum(t1, t2), axis=2)
        hit = (tmax >= tmin) & (tmin > 0) & (tmin < scene_depth)
        scene_depth[hit] = tmin[hit]
        furniture |= hit
    return layout_depth, label, scene_depth, furniture


def occlusion_planes(room, K, first_id):
    """Planes through the camera center and each visible silhouette corner.

    A plan vertex is a silhouette when both neighbouring vertices lie on the
    same side of the viewing direction through it.
    """
    plan = room.plan
    n = len(plan)
    out = []
    for i in range(n):
        V, P, Q = plan[i], plan[i - 1], plan[(i + 1) % n]
        if V[1] <= 0.05:
            continue
        side_p = V[0] * P[1] - V[1] * P[0]
        side_q = V[0] * Q[1] - V[1] * Q[0]
        if side_p * side_q <= 0:
            continue
        u = K.fx * V[0] / V[1] + K.cx
        if not 0.5 < u < K.width - 0.5:
            continue
        # visible unless some wall is hit before reaching the vertex
        a = V[0] / V[1]
        blocked = False
        for A, B in room.walls.values():
            d = B - A
            nx, nz = -d[1], d[0]
            den = nx * a + nz
            if abs(den) < 1e-12:
                continue
            t = (nx * A[0] + nz * A[1]) / den
            s = ((a * t - A[0]) * d[0] + (t - A[1]) * d[1]) / (d @ d)
            if 1e-9 < t < V[1] - 1e-6 and -1e-9 <= s <= 1 + 1e-9:
                blocked = True
                break
        if blocked:
            continue
        out.append(PlaneEq.make((-V[1], 0.0, V[0]), 0.0, "wall", first_id + len(out), orient=False))
    return out


def _perturb(plane, rng, angle_std_deg, offset_std):
    n = plane.n
    if angle_std_deg > 0:
        axis = np.cross(n, rng.normal(size=3))
        axis /= np.linalg.norm(axis)
        ang = np.radians(rng.normal(0.0, angle_std_deg))
        # Rodrigues rotation about an axis perpendicular to n
        n = n * np.cos(ang) + np.cross(axis, n) * np.sin(ang)
    d = plane.offset + (rng.normal(0.0, offset_std) if offset_std > 0 else 0.0)
    return PlaneEq.make(n, d, plane.label, plane.id)


def _dropped(plane, dropout):
    return plane.label in dropout or plane.id in dropout or str(plane.id) in dropout


def ground_truth_layout(room, K, labels, visible):
    """Pick, per visible surface, the candidate polygon that best matches the
    ray-cast region, and check the result reproduces the label map."""
    first = max(room.planes) + 1
    occ = occlusion_planes(room, K, first)
    planes = [room.planes[s] for s in sorted(visible)] + occ
    planes += frustum_planes(K, first_id=first + len(occ))
    cands = build_candidates(planes, K)
    chosen = []
    for sid in sorted(visible):
        region = labels == sid
        best, best_iou = None, -1.0
        for poly in cands.polygons:
            if poly.plane != sid:
                continue
            m = rasterize_polygon(poly, K)
            inter = np.count_nonzero(m & region)
            score = inter / max(np.count_nonzero(m | region), 1)
            if score > best_iou:
                best, best_iou = poly, score
        if best is None:
            raise RuntimeError(f"no candidate polygon for visible surface {sid}")
        chosen.append(best)
    gt = build_layout(Solution(chosen, 0.0), cands,
                      trace={"source": "synthetic ground truth"})
    _, rendered = gt.render(K)
    plane_of = {p.id: p.plane for p in gt.polygons}
    surf = np.vectorize(lambda i: plane_of.get(int(i), -1))(rendered)
    agree = float(np.mean(surf == labels))
    if agree < 0.999:
        raise RuntimeError(f"ground-truth layout reproduces only {agree:.4f} of the label map")
    return gt, occ


def generate_scene(spec):
    """Return ``(SceneInput, ground-truth Layout)`` for a synthetic spec."""
    rng = np.random.default_rng(spec.seed)
    K = CameraIntrinsics(spec.focal, spec.focal, spec.width / 2.0, spec.height / 2.0,
                         spec.width, spec.height)
    room = make_room(spec)
    layout_depth, labels, scene_depth, furniture = raycast(room, K, spec.furniture)
    visible = sorted(int(s) for s in np.unique(labels))
    gt, occ = ground_truth_layout(room, K, labels, visible)
    gt.trace.update({"preset": spec.preset, "seed": spec.seed,
                     "occlusion_planes": [p.id for p in occ]})

    depth = scene_depth
    if spec.depth_std > 0:
        depth = depth + rng.normal(0.0, spec.depth_std, size=depth.shape)
    depth = np.maximum(depth, 1e-3)
    for _ in range(spec.holes):
        r, c = rng.integers(0, K.height - 4), rng.integers(0, K.width - 4)
        depth[r:r + 5, c:c + 5] = 0.0
    depth = depth.astype(np.float32).astype(np.float64)

    structure = None
    if spec.erosion_px > 0:
        r = spec.erosion_px
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
        structure = xx * xx + yy * yy <= r * r
    planes, masks = [], {}
    for sid in visible:
        plane = room.planes[sid]
        if _dropped(plane, spec.dropout):
            continue
        planes.append(_perturb(plane, rng, spec.plane_angle_std_deg, spec.plane_offset_std))
        m = (labels == sid) & ~furniture
        if structure is not None:
            m = ndimage.binary_erosion(m, structure=structure)
        if m.any():
            masks[sid] = m
    scene = SceneInput(K, depth, planes, SegmentationRegions(masks), spec.mode)
    return scene, gt


def generate_with_truth(spec):
    """Like generate_scene, also returning the ray-cast layout depth and
    surface label map."""
    scene, gt = generate_scene(spec)
    room = make_room(spec)
    layout_depth, labels, _, _ = raycast(room, scene.intrinsics, spec.furniture)
    return scene, gt, layout_depth, labels


__all__ = ["SynthSpec", "Box", "PRESETS", "preset_spec", "generate_scene", "generate_with_truth",
           "make_room", "raycast"]
