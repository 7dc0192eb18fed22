"""Keypoint, skeleton and frame types shared by every pipeline stage."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Mapping, Optional

import numpy as np

NOSE = "nose"
NECK = "neck"
ROOT = "root"

# Internal joint vocabulary: 12 basic joints + nose/neck, plus the synthesized root.
JOINTS: tuple[str, ...] = (
    "nose",
    "neck",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "root",
)
JOINT_SET = frozenset(JOINTS)
SHOULDERS = ("left_shoulder", "right_shoulder")
HIPS = ("left_hip", "right_hip")


class MissingJoints(ValueError):
    """Raised when a derived joint cannot be synthesized from what is present."""


def clamp_confidence(c: float) -> float:
    return min(1.0, max(0.0, float(c)))


@dataclass(frozen=True)
class Keypoint:
    name: str
    position: tuple[float, float, float]
    confidence: float

    def __post_init__(self):
        if self.name not in JOINT_SET:
            raise ValueError(f"unknown joint {self.name!r}")
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError(f"{self.name}: position must be 3 finite values, got {self.position!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"{self.name}: confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "confidence", float(self.confidence))

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position)

    def with_confidence(self, c: float) -> "Keypoint":
        return Keypoint(self.name, self.position, clamp_confidence(c))


@dataclass(frozen=True)
class Skeleton:
    """One person in one frame.

    Missing joints are simply absent from ``keypoints``.  ``assignment_cost``
    is set by the tracker only when the skeleton was matched to an existing
    track in the current frame.
    """

    keypoints: Mapping[str, Keypoint] = field(default_factory=dict)
    track_id: Optional[int] = None
    assignment_cost: Optional[float] = None
    estimated_height: Optional[float] = None

    def __post_init__(self):
        for name, kp in self.keypoints.items():
            if kp.name != name:
                raise ValueError(f"keypoint stored under {name!r} is named {kp.name!r}")
        if self.track_id is not None and self.track_id < 0:
            raise ValueError("track_id must be non-negative")
        if self.assignment_cost is not None and not self.assignment_cost >= 0:
            raise ValueError("assignment_cost must be non-negative")

    @classmethod
    def from_keypoints(cls, kps: Iterable[Keypoint], **kwargs) -> "Skeleton":
        mapping: dict[str, Keypoint] = {}
        for kp in kps:
            if kp.name in mapping:
                raise ValueError(f"duplicate joint {kp.name!r}")
            mapping[kp.name] = kp
        return cls(mapping, **kwargs)

    def __contains__(self, name: str) -> bool:
        return name in self.keypoints

    def __len__(self) -> int:
        return len(self.keypoints)

    def get(self, name: str) -> Optional[Keypoint]:
        return self.keypoints.get(name)

    def position(self, name: str) -> np.ndarray:
        return self.keypoints[name].xyz

    def replace(self, **changes) -> "Skeleton":
        return dataclasses.replace(self, **changes)

    def with_keypoints(self, kps: Iterable[Keypoint]) -> "Skeleton":
        merged = dict(self.keypoints)
        for kp in kps:
            merged[kp.name] = kp
        return self.replace(keypoints=merged)


@dataclass(frozen=True)
class Frame:
    timestamp: float
    skeletons: tuple[Skeleton, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        object.__setattr__(self, "skeletons", tuple(self.skeletons))


@dataclass(frozen=True)
class SkeletonGraph:
    """Bone topology as a tree rooted at ``root``.

    ``proportion`` maps each (parent, child) edge to its expected
    segment-length / body-height ratio.
    """

    edges: tuple[tuple[str, str], ...]
    proportion: Mapping[tuple[str, str], float]

    def __post_init__(self):
        parents: dict[str, str] = {}
        for parent, child in self.edges:
            if parent not in JOINT_SET or child not in JOINT_SET:
                raise ValueError(f"edge ({parent}, {child}) uses unknown joints")
            if child in parents:
                raise ValueError(f"{child} has more than one parent")
            parents[child] = parent
        if ROOT in parents:
            raise ValueError("root cannot have a parent")
        if set(self.proportion) != set(self.edges):
            raise ValueError("proportion table must cover exactly the edges")
        for edge, ratio in self.proportion.items():
            if not 0.0 < ratio < 0.5:
                raise ValueError(f"proportion for {edge} must be in (0, 0.5), got {ratio}")
        try:
            self.topological_order()
        except CycleError as exc:
            raise ValueError("skeleton graph has a cycle") from exc

    def topological_order(self) -> tuple[str, ...]:
        sorter = TopologicalSorter()
        for parent, child in self.edges:
            sorter.add(child, parent)
        return tuple(sorter.static_order())

    def parent(self, joint: str) -> Optional[str]:
        for p, c in self.edges:
            if c == joint:
                return p
        return None

    def incident(self, joint: str) -> list[tuple[str, str]]:
        return [e for e in self.edges if joint in e]


# Segment / height ratios after Drillis & Contini.  Torso edges follow from
# landmark heights (shoulder 0.818, hip 0.530) and widths (shoulder 0.259,
# hip 0.191) given that neck and root are synthesized as joint midpoints.
_SHOULDER_HALF_WIDTH = 0.259 / 2
_HIP_HALF_WIDTH = 0.191 / 2
_ROOT_TO_NECK = (0.818 - 0.530) / 2
_PROPORTIONS: dict[tuple[str, str], float] = {
    ("root", "neck"): _ROOT_TO_NECK,
    ("root", "left_hip"): math.hypot(_ROOT_TO_NECK, _HIP_HALF_WIDTH),
    ("root", "right_hip"): math.hypot(_ROOT_TO_NECK, _HIP_HALF_WIDTH),
    ("neck", "nose"): 0.085,  # sternal notch to nose tip (chin 0.870, eye 0.936)
    ("neck", "left_shoulder"): _SHOULDER_HALF_WIDTH,
    ("neck", "right_shoulder"): _SHOULDER_HALF_WIDTH,
    ("left_shoulder", "left_elbow"): 0.186,  # upper arm
    ("right_shoulder", "right_elbow"): 0.186,
    ("left_elbow", "left_wrist"): 0.146,  # forearm
    ("right_elbow", "right_wrist"): 0.146,
    ("left_hip", "left_knee"): 0.245,  # thigh
    ("right_hip", "right_knee"): 0.245,
    ("left_knee", "left_ankle"): 0.246,  # leg
    ("right_knee", "right_ankle"): 0.246,
}


def default_graph() -> SkeletonGraph:
    return SkeletonGraph(edges=tuple(_PROPORTIONS), proportion=dict(_PROPORTIONS))


def _mean_keypoint(name: str, contributors: list[Keypoint]) -> Keypoint:
    pos = np.mean([kp.xyz for kp in contributors], axis=0)
    conf = sum(kp.confidence for kp in contributors) / len(contributors)
    return Keypoint(name, tuple(pos), clamp_confidence(conf))


def synthesize_root(skeleton: Skeleton) -> Skeleton:
    """Add a root keypoint at the mean of all present shoulders and hips.

    The root confidence is the mean of the contributing confidences.
    Raises MissingJoints when no shoulder or no hip is present.
    """
    shoulders = [skeleton.keypoints[j] for j in SHOULDERS if j in skeleton]
    hips = [skeleton.keypoints[j] for j in HIPS if j in skeleton]
    if not shoulders or not hips:
        raise MissingJoints("root needs at least one shoulder and one hip")
    return skeleton.with_keypoints([_mean_keypoint(ROOT, shoulders + hips)])


def synthesize_neck(skeleton: Skeleton) -> Skeleton:
    """Add a neck keypoint at the shoulder midpoint (both shoulders required)."""
    if not all(j in skeleton for j in SHOULDERS):
        raise MissingJoints("neck needs both shoulders")
    return skeleton.with_keypoints([_mean_keypoint(NECK, [skeleton.keypoints[j] for j in SHOULDERS])])


def complete_skeleton(skeleton: Skeleton) -> Skeleton:
    """Synthesize neck and root when the backbone did not provide them.

    A missing neck that cannot be built is left absent; a missing root that
    cannot be built raises MissingJoints.
    """
    if NECK not in skeleton:
        try:
            skeleton = synthesize_neck(skeleton)
        except MissingJoints:
            pass
    if ROOT not in skeleton:
        skeleton = synthesize_root(skeleton)
    return skeleton
