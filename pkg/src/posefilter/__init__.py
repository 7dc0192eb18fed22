"""Confidence-aware post-processing of 3D human pose streams.

Stages: spatial plausibility checks on each skeleton, identity tracking
across frames, and a per-keypoint particle filter that keeps predicting
joints through occlusion.  Kalman baselines, a scenario simulator and
trajectory metrics are included for comparison.
"""
from .baselines import KalmanConfig, KalmanTracker
from .metrics import MetricReport, Trajectory, evaluate, kabsch_align
from .permanence import PermanenceConfig, PermanenceFilter
from .pipeline import Pipeline, PipelineConfig, run_stream
from .skeleton import JOINTS, Frame, Keypoint, Skeleton, SkeletonGraph, default_graph
from .spatial import SpatialConfig, evaluate_frame
from .tracker import TrackerConfig, TrackRegistry, solve_assignment, track_frame

__version__ = "0.1.0"

__all__ = [
    "Frame", "JOINTS", "KalmanConfig", "KalmanTracker", "Keypoint", "MetricReport",
    "PermanenceConfig", "PermanenceFilter", "Pipeline", "PipelineConfig", "Skeleton",
    "SkeletonGraph", "SpatialConfig", "TrackRegistry", "TrackerConfig", "Trajectory",
    "default_graph", "evaluate", "evaluate_frame", "kabsch_align", "run_stream",
    "solve_assignment", "track_frame",
]
