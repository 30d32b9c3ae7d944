import json
import logging
import os

import numpy as np
import pytest

from planelayout.cost import SegmentationRegions
from planelayout.geometry import CameraIntrinsics, PlaneEq
from planelayout.scene_io import SceneError, SceneInput, load_scene, read_pfm, save_scene, write_pfm


def make_scene(rng, mode="rgbd"):
    K = CameraIntrinsics(55.5, 56.25, 20.1, 14.9, 40, 30)
    depth = rng.uniform(0.5, 8, K.shape).astype(np.float32).astype(np.float64)
    n = rng.normal(size=3)
    planes = [PlaneEq.make(n, 2.345678901234567, "wall", 3), PlaneEq.make((0, 1, 0), 1.5, "floor", 0)]
    m = rng.random(K.shape) < 0.5
    return SceneInput(K, depth, planes, SegmentationRegions({3: m, 0: ~m}), mode)


def test_roundtrip_lossless(tmp_path, rng):
    s = make_scene(rng)
    save_scene(s, tmp_path)
    t = load_scene(tmp_path)
    assert t.intrinsics == s.intrinsics and t.mode == s.mode
    assert t.planes == s.planes
    assert np.array_equal(t.depth, s.depth)
    assert t.regions.masks.keys() == s.regions.masks.keys()
    for k in s.regions.masks:
        assert np.array_equal(t.regions.masks[k], s.regions.masks[k])


def test_pfm_layout(tmp_path):
    a = np.arange(6, dtype=np.float64).reshape(2, 3)
    write_pfm(tmp_path / "x.pfm", a)
    raw = (tmp_path / "x.pfm").read_bytes()
    assert raw.startswith(b"Pf\n3 2\n-1.0\n")
    body = np.frombuffer(raw[len(b"Pf\n3 2\n-1.0\n"):], "<f4")
    assert body.tolist() == [3, 4, 5, 0, 1, 2]  # bottom row first
    assert np.array_equal(read_pfm(tmp_path / "x.pfm"), a)


def test_missing_depth_rgbd(tmp_path, rng):
    save_scene(make_scene(rng), tmp_path)
    os.remove(tmp_path / "depth.pfm")
    with pytest.raises(SceneError, match="depth"):
        load_scene(tmp_path)
    doc = json.loads((tmp_path / "scene.json").read_text())
    doc["mode"] = "rgb-predicted"
    (tmp_path / "scene.json").write_text(json.dumps(doc))
    assert load_scene(tmp_path).depth is None


def test_wrong_mask_size_names_file(tmp_path, rng):
    save_scene(make_scene(rng), tmp_path)
    from PIL import Image
    Image.fromarray(np.zeros((5, 5), np.uint8)).save(tmp_path / "masks" / "plane_3.png")
    with pytest.raises(SceneError) as e:
        load_scene(tmp_path)
    assert any("plane_3.png" in p for p in e.value.problems)


def test_normal_renormalization(tmp_path, rng, caplog):
    save_scene(make_scene(rng), tmp_path)
    doc = json.loads((tmp_path / "scene.json").read_text())
    doc["planes"][1]["normal"] = [0.0, 1.0005, 0.0]
    (tmp_path / "scene.json").write_text(json.dumps(doc))
    with caplog.at_level(logging.WARNING):
        s = load_scene(tmp_path)
    assert "renormalized" in caplog.text
    assert s.plane_map()[0].normal == (0.0, 1.0, 0.0)
    doc["planes"][1]["normal"] = [0.0, 1.1, 0.0]
    (tmp_path / "scene.json").write_text(json.dumps(doc))
    with pytest.raises(SceneError, match="not unit"):
        load_scene(tmp_path)


def test_all_problems_listed(tmp_path, rng):
    save_scene(make_scene(rng), tmp_path)
    doc = json.loads((tmp_path / "scene.json").read_text())
    del doc["intrinsics"]
    doc["mode"] = "lidar"
    doc["regions"].append({"plane": 42, "mask": "masks/nope.png"})
    (tmp_path / "scene.json").write_text(json.dumps(doc))
    with pytest.raises(SceneError) as e:
        load_scene(tmp_path)
    text = " | ".join(e.value.problems)
    assert "intrinsics" in text and "lidar" in text and "nope.png" in text
