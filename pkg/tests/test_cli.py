import json

import numpy as np
import pytest

from planelayout.cli import main
from planelayout.layout import from_json
from planelayout.raster import plane_depth, rasterize_pixels
from planelayout.scene_io import load_scene, read_pfm


@pytest.fixture(scope="module")
def cuboid_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cuboid")
    assert main(["synth", "--preset", "cuboid", "--out", str(d)]) == 0
    assert main(["solve", "--scene", str(d), "--out", str(d / "l.json")]) == 0
    return d


def test_synth_solve_eval(cuboid_dir, capsys):
    d = cuboid_dir
    capsys.readouterr()
    assert main(["eval", "--pred", str(d / "l.json"), "--gt", str(d / "gt.json"), "--scene", str(d),
                 "--out", str(d / "r.json")]) == 0
    rep = json.loads((d / "r.json").read_text())
    assert rep["iou"] >= 0.99
    assert json.loads(capsys.readouterr().out) == rep


def test_render_reproduces_k3d_depth(cuboid_dir):
    d = cuboid_dir
    assert main(["render", "--layout", str(d / "l.json"), "--scene", str(d), "--out", str(d / "r.pfm"),
                 "--labels", str(d / "lab.png")]) == 0
    scene = load_scene(d)
    K = scene.intrinsics
    layout = from_json((d / "l.json").read_text())
    depth, labels = layout.render(K)
    assert np.array_equal(read_pfm(d / "r.pfm"), depth.astype(np.float32).astype(np.float64))
    pm = layout.plane_map()
    pix = layout.projected(K)
    for p in layout.polygons:
        fp = rasterize_pixels(pix[p.id], K)
        own = labels == p.id
        # on the polygon's own pixels, the render equals the depth used for its k3d term
        assert np.array_equal(depth[own], plane_depth(pm[p.plane], K, fp)[own])


def test_solve_is_deterministic(cuboid_dir):
    d = cuboid_dir
    assert main(["solve", "--scene", str(d), "--out", str(d / "l2.json"), "--seed", "0"]) == 0
    a = json.loads((d / "l.json").read_text())
    b = json.loads((d / "l2.json").read_text())
    a["trace"].pop("seconds"), b["trace"].pop("seconds")
    a["trace"]["search"].pop("seconds"), b["trace"]["search"].pop("seconds")
    assert a == b


def test_mesh_output(cuboid_dir):
    d = cuboid_dir
    assert main(["solve", "--scene", str(d), "--out", str(d / "m.obj"), "--format", "mesh", "--no-refine"]) == 0
    assert (d / "m.obj").read_text().count("g polygon_") == 5


def test_infeasible_no_refine(tmp_path, capsys):
    d = tmp_path / "ceiling"
    assert main(["synth", "--preset", "cuboid", "--out", str(d), "--dropout", "floor", "2", "3", "4", "5"]) == 0
    capsys.readouterr()
    assert main(["solve", "--scene", str(d), "--out", str(tmp_path / "x.json"), "--no-refine"]) != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "no feasible partition"


def test_bad_scene_error_json(tmp_path, capsys):
    assert main(["solve", "--scene", str(tmp_path / "missing"), "--out", str(tmp_path / "x.json")]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["type"] == "SceneError" and err["problems"]


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["solve", "--help"])
    out = capsys.readouterr().out
    assert "default: 1.0" in out and "default: 5" in out
