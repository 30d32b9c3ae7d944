"""End-to-end reconstruction: scene in, structured layout out."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .candidates import CandidateConfig
from .geometry import PlaneFitConfig, fit_plane_to_region
from .layout import build_layout
from .raster import valid_depth
from .refine import RansacConfig, RefineConfig, fill_depth_holes, floor_fallback, refine_loop, solve_planes
from .solver import SolveConfig

log = logging.getLogger(__name__)


class NoFeasiblePartition(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    solve: SolveConfig = field(default_factory=SolveConfig)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    fit: PlaneFitConfig = field(default_factory=PlaneFitConfig)
    do_refine: bool = True
    refit_planes: bool = True
    camera_height: float = 1.5


def working_planes(scene, depth, cfg):
    """Scene planes, refitted to the depth inside their region when possible."""
    planes = []
    for p in sorted(scene.planes, key=lambda p: p.id):
        mask = scene.regions.get(p.id)
        if cfg.refit_planes and depth is not None and mask is not None:
            fit = fit_plane_to_region(scene.intrinsics, depth, mask & valid_depth(depth),
                                      p.label, p.id, cfg.fit)
            if fit is not None and abs(fit.n @ p.n) > 0.9:
                p = fit
        planes.append(p)
    return planes


def reconstruct(scene, cfg=None):
    """Run plane preparation, search and refinement. Returns ``(Layout, Attempt)``.

    Raises NoFeasiblePartition when no candidate subset tiles the image.
    """
    cfg = cfg or PipelineConfig()
    t0 = time.perf_counter()
    K = scene.intrinsics
    raw = scene.depth
    depth = fill_depth_holes(raw) if raw is not None else None
    planes = working_planes(scene, raw, cfg)
    trace = {"mode": scene.mode, "lambda": cfg.solve.lam, "refine_config": cfg.refine.to_dict(),
             "ransac_seed": cfg.ransac.seed, "floor_fallback": None}

    if not any(p.label == "floor" for p in planes):
        walls = [p for p in planes if p.label == "wall"]
        try:
            floor = floor_fallback(walls, cfg.camera_height, id=max((p.id for p in planes), default=-1) + 1)
            planes.append(floor)
            trace["floor_fallback"] = floor.to_dict()
        except ValueError as exc:
            log.warning("%s", exc)
            trace["floor_fallback"] = {"error": str(exc)}

    att = solve_planes(K, planes, depth, scene.regions, cfg.solve, cfg.candidates)
    if att.solution is None:
        raise NoFeasiblePartition("no feasible partition")
    trace["initial_discrepancy"] = att.disc.mean if att.disc is not None else None
    trace["initial_cost"] = att.solution.cost
    steps = []
    if cfg.do_refine:
        att, steps = refine_loop(K, att, depth, scene.regions, cfg.refine, cfg.ransac,
                                 cfg.solve, cfg.candidates)
    trace["refinement"] = steps
    trace["final_discrepancy"] = att.disc.mean if att.disc is not None else None
    trace["cost"] = att.solution.cost
    trace["search"] = att.solution.report.to_dict()
    trace["enumeration_warnings"] = [w.plane_id for w in att.candidates.warnings]
    trace["seconds"] = time.perf_counter() - t0
    return build_layout(att.solution, att.candidates, trace), att
