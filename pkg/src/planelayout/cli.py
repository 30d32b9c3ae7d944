"""Command line entry point: ``planelayout {solve,eval,render,synth}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np
from PIL import Image

from .layout import export_layout, from_json, to_json
from .metrics import evaluate
from .pipeline import NoFeasiblePartition, PipelineConfig, reconstruct
from .refine import RansacConfig, RefineConfig
from .scene_io import SceneError, load_scene, save_scene, write_pfm
from .solver import SolveConfig
from .synth import PRESETS, preset_spec, generate_scene


class CliError(Exception):
    pass


def _read_layout(path):
    with open(path) as f:
        return from_json(f.read())


def _write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as f:
        f.write(data)


def cmd_solve(args):
    scene = load_scene(args.scene)
    if args.depth_source == "provided-predicted":
        scene.mode = "rgb-predicted"
    elif args.depth_source == "measured":
        scene.mode = "rgbd"
    cfg = PipelineConfig(
        solve=SolveConfig(lam=args.lam),
        refine=RefineConfig(max_iterations=args.max_refine),
        ransac=RansacConfig(seed=args.seed),
        do_refine=not args.no_refine,
        refit_planes=not args.no_refit,
    )
    layout, _ = reconstruct(scene, cfg)
    _write(args.out, export_layout(layout, args.format))
    if args.format == "json":
        log_line = {"polygons": len(layout.polygons), "corners": len(layout.corners),
                    "edges": len(layout.edges), "cost": layout.trace["cost"]}
        print(json.dumps(log_line))
    return 0


def cmd_eval(args):
    scene = load_scene(args.scene)
    pred, gt = _read_layout(args.pred), _read_layout(args.gt)
    uts = args.uts or scene.mode == "rgb-predicted"
    report = evaluate(pred, gt, scene.intrinsics, uts=uts)
    text = json.dumps(report.to_dict(), indent=1) + "\n"
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_render(args):
    scene = load_scene(args.scene)
    layout = _read_layout(args.layout)
    depth, labels = layout.render(scene.intrinsics)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    write_pfm(args.out, depth)
    if args.labels:
        if labels.max() >= 255:
            raise CliError("too many polygons for an 8-bit label image")
        Image.fromarray(np.where(labels < 0, 255, labels).astype(np.uint8), mode="L").save(args.labels)
    return 0


def cmd_synth(args):
    kw = dict(seed=args.seed, plane_angle_std_deg=args.plane_noise, plane_offset_std=args.offset_noise,
              depth_std=args.depth_noise, erosion_px=args.erosion, holes=args.holes,
              yaw_deg=args.yaw, mode=args.mode)
    if args.dropout:
        kw["dropout"] = tuple(args.dropout)
    scene, gt = generate_scene(preset_spec(args.preset, **kw))
    save_scene(scene, args.out)
    _write(os.path.join(args.out, "gt.json"), to_json(gt))
    return 0


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = argparse.ArgumentParser(prog="planelayout", description="Structured room layout from planes.",
                                 formatter_class=fmt)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="reconstruct a layout from a scene directory", formatter_class=fmt)
    s.add_argument("--scene", required=True, help="scene directory")
    s.add_argument("--out", required=True, help="output layout file")
    s.add_argument("--lambda", dest="lam", type=float, default=1.0, help="weight of the 2D cost term")
    s.add_argument("--max-refine", type=int, default=5, help="maximum refinement iterations")
    s.add_argument("--seed", type=int, default=0, help="RANSAC seed")
    s.add_argument("--no-refine", action="store_true", help="skip render-and-compare refinement")
    s.add_argument("--no-refit", action="store_true", help="use scene planes as given, no depth refit")
    s.add_argument("--depth-source", choices=("measured", "provided-predicted"), default=None,
                   help="override the scene's depth source flag")
    s.add_argument("--format", choices=("json", "mesh"), default="json", help="output format")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="compare a predicted layout with ground truth", formatter_class=fmt)
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--scene", required=True, help="scene directory (for intrinsics)")
    e.add_argument("--out", default=None, help="report path (always echoed to stdout)")
    e.add_argument("--uts", action="store_true", help="also report median-scaled RMSE")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="render layout depth and labels", formatter_class=fmt)
    r.add_argument("--layout", required=True)
    r.add_argument("--scene", required=True)
    r.add_argument("--out", required=True, help="depth PFM path")
    r.add_argument("--labels", default=None, help="optional 8-bit label PNG (255 = background)")
    r.set_defaults(func=cmd_render)

    y = sub.add_parser("synth", help="write a synthetic scene and its ground truth", formatter_class=fmt)
    y.add_argument("--preset", required=True, choices=sorted(PRESETS))
    y.add_argument("--out", required=True)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--plane-noise", type=float, default=0.0, help="plane normal noise, degrees")
    y.add_argument("--offset-noise", type=float, default=0.0, help="plane offset noise, meters")
    y.add_argument("--depth-noise", type=float, default=0.0, help="depth noise, meters")
    y.add_argument("--erosion", type=int, default=0, help="mask erosion radius, pixels")
    y.add_argument("--holes", type=int, default=0, help="number of 5x5 depth holes")
    y.add_argument("--yaw", type=float, default=0.0, help="camera yaw, degrees")
    y.add_argument("--dropout", nargs="*", default=None, help="plane labels or ids to drop")
    y.add_argument("--mode", choices=("rgbd", "rgb-predicted"), default="rgbd")
    y.set_defaults(func=cmd_synth)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NoFeasiblePartition as exc:
        err = {"error": str(exc), "type": "NoFeasiblePartition"}
    except SceneError as exc:
        err = {"error": "invalid scene", "type": "SceneError", "problems": exc.problems}
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        err = {"error": str(exc), "type": type(exc).__name__}
    sys.stderr.write(json.dumps(err) + "\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
