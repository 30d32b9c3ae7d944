"""Structured indoor layouts from plane hypotheses, regions and depth."""
from .geometry import CameraIntrinsics, PlaneEq
from .kernels import BACKEND
from .layout import Layout, build_layout, export_layout
from .metrics import MetricsReport, evaluate
from .pipeline import NoFeasiblePartition, PipelineConfig, reconstruct
from .scene_io import SceneInput, load_scene, save_scene
from .synth import SynthSpec, generate_scene

__all__ = ["CameraIntrinsics", "PlaneEq", "BACKEND", "Layout", "build_layout", "export_layout",
           "MetricsReport", "evaluate", "NoFeasiblePartition", "PipelineConfig", "reconstruct",
           "SceneInput", "load_scene", "save_scene", "SynthSpec", "generate_scene"]
