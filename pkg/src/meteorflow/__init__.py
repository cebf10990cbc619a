"""Meteor detection on unstabilised sky video as a streaming task graph.

Per frame: threshold, label and measure bright regions, match them with the
previous frame, estimate and remove the camera's rigid motion, keep what
still moves and chain it into tracks.  The chain runs sequentially or as a
three-stage pipeline with a replicated pixel-processing stage.
"""
from ._kernels import BACKEND
from .assoc import Association, KnnParams, match_knn
from .ccl import CC, LabelMap, SurfaceParams, filter_hysteresis, filter_surface, label_and_analyze
from .graphs import ChainParams, DetectionGraph, build_v1, build_v2, detect, stage_cut
from .imgproc import BinaryMask, GrayFrame, ThresholdParams, binarize
from .motion import (
    MotionStats,
    RigidMotion,
    classify_motion,
    estimate_rigid,
    estimate_two_pass,
    register_residuals,
)
from .runtime import (
    PipelineConfig,
    Sequence,
    StreamStats,
    Task,
    build_sequence,
    replicate_stage,
    run_pipeline,
    run_sequential,
)
from .tracking import Track, Tracker

__version__ = "0.1.0"
