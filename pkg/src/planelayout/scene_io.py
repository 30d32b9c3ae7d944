"""Scene directories: ``scene.json``, optional ``depth.pfm``, ``masks/*.png``.

See docs/FORMATS.md for the byte-level description.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cost import SegmentationRegions
from .geometry import CameraIntrinsics, PlaneEq

log = logging.getLogger(__name__)

MODES = ("rgbd", "rgb-predicted")


class SceneError(ValueError):
    """Scene validation failure; ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class SceneInput:
    intrinsics: CameraIntrinsics
    depth: np.ndarray | None
    planes: list
    regions: SegmentationRegions
    mode: str = "rgbd"

    def plane_map(self):
        return {p.id: p for p in self.planes}


def write_pfm(path, data):
    """Single-channel little-endian PFM (scale -1.0), rows stored bottom-up."""
    arr = np.asarray(data, dtype="<f4")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise SceneError([f"{path}: only single-channel PFM is supported"])
        dims = f.readline().split()
        while not dims:
            dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 4), dtype=dtype)
    if data.size != w * h:
        raise SceneError([f"{path}: truncated PFM"])
    return data.reshape(h, w)[::-1].astype(np.float64)


def write_mask(path, mask):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def read_mask(path):
    return np.asarray(Image.open(path).convert("L")) >= 128


def save_scene(scene, path):
    os.makedirs(os.path.join(path, "masks"), exist_ok=True)
    regions = []
    for pid in sorted(scene.regions.masks):
        rel = f"masks/plane_{pid}.png"
        write_mask(os.path.join(path, rel), scene.regions.masks[pid])
        regions.append({"plane": pid, "mask": rel})
    doc = {
        "intrinsics": scene.intrinsics.to_dict(),
        "mode": scene.mode,
        "frame": "camera: x right, y down, z forward; meters",
        "planes": [p.to_dict() for p in scene.planes],
        "regions": regions,
        "depth": "depth.pfm" if scene.depth is not None else None,
    }
    with open(os.path.join(path, "scene.json"), "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    if scene.depth is not None:
        write_pfm(os.path.join(path, "depth.pfm"), scene.depth)


def _load_plane(d, problems):
    n = np.asarray(d.get("normal", []), dtype=float)
    if n.shape != (3,):
        problems.append(f"plane {d.get('id')}: normal must have 3 components")
        return None
    norm = np.linalg.norm(n)
    if abs(norm - 1.0) > 1e-3:
        problems.append(f"plane {d.get('id')}: normal length {norm:.6g} is not unit")
        return None
    if abs(norm - 1.0) > 1e-9:
        log.warning("plane %s: normal renormalized (length %.9g)", d.get("id"), norm)
        n = n / norm
    try:
        return PlaneEq(tuple(n), float(d["offset"]), d["label"], int(d["id"]))
    except (KeyError, ValueError) as exc:
        problems.append(f"plane {d.get('id')}: {exc}")
        return None


def load_scene(path):
    problems = []
    meta_path = os.path.join(path, "scene.json")
    try:
        with open(meta_path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError([f"{meta_path}: {exc}"]) from exc

    K = None
    if "intrinsics" not in doc:
        problems.append("missing intrinsics")
    else:
        try:
            K = CameraIntrinsics.from_dict(doc["intrinsics"])
        except (KeyError, ValueError, TypeError) as exc:
            problems.append(f"invalid intrinsics: {exc}")

    mode = doc.get("mode", "rgbd")
    if mode not in MODES:
        problems.append(f"unknown mode {mode!r}")

    planes = [p for p in (_load_plane(d, problems) for d in doc.get("planes", [])) if p is not None]
    ids = [p.id for p in planes]
    if len(set(ids)) != len(ids):
        problems.append("duplicate plane ids")

    depth = None
    depth_name = doc.get("depth", "depth.pfm")
    depth_path = os.path.join(path, depth_name) if depth_name else None
    if depth_path and os.path.exists(depth_path):
        depth = read_pfm(depth_path)
        if K is not None and depth.shape != K.shape:
            problems.append(f"{depth_name}: size {depth.shape[::-1]} does not match intrinsics")
    elif mode == "rgbd":
        problems.append("mode rgbd requires depth.pfm")

    masks = {}
    for r in doc.get("regions", []):
        rel = r.get("mask", "")
        mpath = os.path.join(path, rel)
        if not os.path.exists(mpath):
            problems.append(f"{rel}: missing mask file")
            continue
        m = read_mask(mpath)
        if K is not None and m.shape != K.shape:
            problems.append(f"{rel}: mask size {m.shape[::-1]} does not match image size")
            continue
        pid = int(r["plane"])
        if pid not in ids:
            problems.append(f"{rel}: region references unknown plane {pid}")
        if pid in masks:
            problems.append(f"{rel}: second region for plane {pid}")
        masks[pid] = m
    if problems:
        raise SceneError(problems)
    return SceneInput(K, depth, planes, SegmentationRegions(masks), mode)

