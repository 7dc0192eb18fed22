"""Spatial evaluation: distance gate, height estimate, bone-length confidence update."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .skeleton import (
    ROOT,
    Frame,
    MissingJoints,
    Skeleton,
    SkeletonGraph,
    complete_skeleton,
    default_graph,
)

log = logging.getLogger(__name__)


class MissingRoot(MissingJoints):
    pass


@dataclass
class SpatialConfig:
    distance_threshold: float = 3.0  # meters
    reward: float = 0.10
    penalty: float = 0.10
    proportion_tolerance: float = 0.20
    height_bounds: tuple[float, float] = (1.0, 2.2)
    camera_origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.height_bounds = tuple(self.height_bounds)
        self.camera_origin = tuple(self.camera_origin)
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be positive")
        for name in ("reward", "penalty", "proportion_tolerance"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in (0, 1)")
        lo, hi = self.height_bounds
        if not lo < hi:
            raise ValueError("height_bounds must satisfy min < max")


def root_distance(skeleton: Skeleton, cfg: SpatialConfig) -> float:
    if ROOT not in skeleton:
        raise MissingRoot("skeleton has no root; synthesize it first")
    return float(np.linalg.norm(skeleton.position(ROOT) - np.asarray(cfg.camera_origin)))


def gate_by_distance(skeleton: Skeleton, cfg: SpatialConfig) -> bool:
    """True if the root lies within ``distance_threshold`` of the camera (inclusive)."""
    return root_distance(skeleton, cfg) <= cfg.distance_threshold


def _present_edges(skeleton: Skeleton, graph: SkeletonGraph) -> list[tuple[str, str]]:
    return [(a, b) for a, b in graph.edges if a in skeleton and b in skeleton]


def _edge_length(skeleton: Skeleton, edge: tuple[str, str]) -> float:
    a, b = edge
    return float(np.linalg.norm(skeleton.position(a) - skeleton.position(b)))


def height_hypotheses(skeleton: Skeleton, graph: SkeletonGraph) -> list[float]:
    return [_edge_length(skeleton, e) / graph.proportion[e] for e in _present_edges(skeleton, graph)]


def estimate_height(skeleton: Skeleton, graph: SkeletonGraph, cfg: SpatialConfig) -> Optional[float]:
    """Mean of the per-bone height hypotheses that fall inside ``height_bounds``.

    Returns None when no hypothesis survives.
    """
    lo, hi = cfg.height_bounds
    survivors = [h for h in height_hypotheses(skeleton, graph) if lo <= h <= hi]
    if not survivors:
        return None
    return float(np.mean(survivors))


def classify_edges(skeleton: Skeleton, graph: SkeletonGraph, height: float, tolerance: float) -> dict[tuple[str, str], bool]:
    """Map each present edge to True (length compatible with ``height``) or False."""
    out = {}
    for e in _present_edges(skeleton, graph):
        expected = graph.proportion[e] * height
        length = _edge_length(skeleton, e)
        out[e] = (1 - tolerance) * expected <= length <= (1 + tolerance) * expected
    return out


def confidence_factor(n_valid: int, n_invalid: int, reward: float, penalty: float) -> float:
    if n_valid + n_invalid == 0:
        return 1.0
    if n_invalid == 0:
        return 1 + 2 * reward
    if n_invalid >= 2:
        return 1 - 2 * penalty
    return (1 + reward) ** n_valid * (1 - penalty) ** n_invalid


def adjust_confidences(skeleton: Skeleton, graph: SkeletonGraph, cfg: SpatialConfig) -> Skeleton:
    """Reward keypoints on plausible bones and penalize those on implausible ones.

    Uses ``skeleton.estimated_height``; without it the skeleton is returned
    unchanged.
    """
    if skeleton.estimated_height is None:
        log.debug("no height estimate; confidences left unchanged")
        return skeleton
    validity = classify_edges(skeleton, graph, skeleton.estimated_height, cfg.proportion_tolerance)
    n_valid = dict.fromkeys(skeleton.keypoints, 0)
    n_invalid = dict.fromkeys(skeleton.keypoints, 0)
    for (a, b), ok in validity.items():
        counter = n_valid if ok else n_invalid
        counter[a] += 1
        counter[b] += 1
    adjusted = [
        kp.with_confidence(kp.confidence * confidence_factor(n_valid[name], n_invalid[name], cfg.reward, cfg.penalty))
        for name, kp in skeleton.keypoints.items()
    ]
    return skeleton.with_keypoints(adjusted)


def evaluate_skeleton(
    skeleton: Skeleton, cfg: SpatialConfig, graph: Optional[SkeletonGraph] = None
) -> Optional[Skeleton]:
    """Run the whole spatial node on one skeleton; None means discarded."""
    graph = graph or default_graph()
    try:
        skeleton = complete_skeleton(skeleton)
    except MissingJoints:
        log.debug("discarding skeleton without a synthesizable root")
        return None
    if not gate_by_distance(skeleton, cfg):
        return None
    skeleton = skeleton.replace(estimated_height=estimate_height(skeleton, graph, cfg))
    return adjust_confidences(skeleton, graph, cfg)


def evaluate_frame(frame: Frame, cfg: SpatialConfig, graph: Optional[SkeletonGraph] = None) -> Frame:
    graph = graph or default_graph()
    kept = [s for s in (evaluate_skeleton(sk, cfg, graph) for sk in frame.skeletons) if s is not None]
    return Frame(frame.timestamp, tuple(kept))
