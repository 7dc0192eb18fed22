"""Synthetic multi-person scenarios with ground truth and HPE-like corruption.

Bodies are rigid anthropometric skeletons (segment lengths from the
proportion table) whose arms are driven by scripted wrist paths through a
two-link inverse kinematics solve.  Coordinates are in a camera frame with
y up and persons standing in front of the camera (positive z), facing it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .metrics import Trajectory
from .skeleton import JOINTS, NECK, ROOT, Frame, Keypoint, Skeleton, SkeletonGraph, default_graph

TASKS = ("t0_sinusoid", "t1_interaction", "t2_handover_close", "t3_heavy_occlusion", "custom")
TASK_ALIASES = {"t0": "t0_sinusoid", "t1": "t1_interaction", "t2": "t2_handover_close", "t3": "t3_heavy_occlusion"}

# joints a typical 2D backbone reports; neck and root are synthesized downstream
EMITTED_JOINTS = tuple(j for j in JOINTS if j not in (NECK, ROOT))


class InvalidSpec(ValueError):
    pass


@dataclass
class NoiseSpec:
    gaussian_sigma: float = 0.02  # m, per axis
    outlier_rate: float = 0.05
    outlier_magnitude: float = 0.5  # m
    dropout_rate: float = 0.02
    # confidence ranges (uniform) per corruption kind
    confidence_model: dict = field(
        default_factory=lambda: {"clean": (0.7, 1.0), "outlier": (0.3, 0.7), "occluded": (0.05, 0.35)}
    )
    occluded_absent_prob: float = 0.5
    hallucination_range: tuple[float, float] = (0.15, 0.4)  # m, displacement of occluded detections

    def __post_init__(self):
        for name in ("outlier_rate", "dropout_rate", "occluded_absent_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec(f"{name} must be a probability")
        if self.gaussian_sigma < 0 or self.outlier_magnitude < 0:
            raise InvalidSpec("noise magnitudes must be non-negative")
        for kind, (lo, hi) in self.confidence_model.items():
            if not 0.0 <= lo <= hi <= 1.0:
                raise InvalidSpec(f"bad confidence range for {kind}")

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(
            gaussian_sigma=0.0,
            outlier_rate=0.0,
            dropout_rate=0.0,
            confidence_model={"clean": (1.0, 1.0), "outlier": (0.3, 0.7), "occluded": (0.05, 0.35)},
        )


@dataclass(frozen=True)
class Occlusion:
    track: int
    joints: tuple[str, ...]
    start: float  # s
    end: float  # s, exclusive

    def active(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass
class ScenarioSpec:
    task: str = "t0_sinusoid"
    duration: float = 20.0  # s
    rate: float = 30.0  # Hz
    persons: int = 2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    occlusions: Optional[list[Occlusion]] = None  # None -> task defaults
    seed: int = 0
    heights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        self.task = TASK_ALIASES.get(self.task, self.task)
        if self.task not in TASKS:
            raise InvalidSpec(f"unknown task {self.task!r}")
        if self.rate <= 0 or self.duration <= 0:
            raise InvalidSpec("rate and duration must be positive")
        if self.persons < 1:
            raise InvalidSpec("need at least one person")
        if self.heights is not None and len(self.heights) < self.persons:
            raise InvalidSpec("one height per person required")
        for occ in self.occlusions or ():
            if not 0 <= occ.start < occ.end <= self.duration:
                raise InvalidSpec(f"occlusion window {occ} outside [0, duration]")
            if not 0 <= occ.track < self.persons:
                raise InvalidSpec(f"occlusion references unknown person {occ.track}")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.rate))

    def times(self) -> np.ndarray:
        return np.arange(self.frame_count) / self.rate


@dataclass
class Scenario:
    spec: ScenarioSpec
    truth_frames: list[Frame]
    frames: list[Frame]

    @property
    def truth(self) -> dict[int, dict[str, Trajectory]]:
        """Ground truth as person -> joint -> trajectory."""
        out: dict[int, dict[str, list]] = {}
        for fr in self.truth_frames:
            for sk in fr.skeletons:
                for name, kp in sk.keypoints.items():
                    out.setdefault(sk.track_id, {}).setdefault(name, []).append((fr.timestamp, kp.position))
        return {pid: {j: Trajectory.from_samples(s, f"truth/{pid}/{j}") for j, s in joints.items()}
                for pid, joints in out.items()}


# ---------------------------------------------------------------- bodies


def body_from_height(h: float, graph: Optional[SkeletonGraph] = None) -> Skeleton:
    """Standing skeleton, root at the origin, every bone exactly ``ratio * h`` long.

    Arms and legs hang straight down; the person faces -z with their left
    side on +x.
    """
    g = graph or default_graph()
    L = {e: r * h for e, r in g.proportion.items()}
    up = np.array([0.0, 1.0, 0.0])
    pos = {ROOT: np.zeros(3)}
    pos[NECK] = L[(ROOT, NECK)] * up
    pos["nose"] = pos[NECK] + L[(NECK, "nose")] * up
    for side, sgn in (("left", 1.0), ("right", -1.0)):
        sh = f"{side}_shoulder"
        pos[sh] = pos[NECK] + sgn * L[(NECK, sh)] * np.array([1.0, 0, 0])
        pos[f"{side}_elbow"] = pos[sh] - L[(sh, f"{side}_elbow")] * up
        pos[f"{side}_wrist"] = pos[f"{side}_elbow"] - L[(f"{side}_elbow", f"{side}_wrist")] * up
        hip = f"{side}_hip"
        # hips mirror the shoulders vertically so that root stays their common mean
        drop = L[(ROOT, NECK)]
        lateral = math.sqrt(max(L[(ROOT, hip)] ** 2 - drop**2, 0.0))
        pos[hip] = np.array([sgn * lateral, -drop, 0.0])
        pos[f"{side}_knee"] = pos[hip] - L[(hip, f"{side}_knee")] * up
        pos[f"{side}_ankle"] = pos[f"{side}_knee"] - L[(f"{side}_knee", f"{side}_ankle")] * up
    return Skeleton({j: Keypoint(j, tuple(pos[j]), 1.0) for j in JOINTS}, estimated_height=h)


def two_link_ik(shoulder, target, upper: float, lower: float, hint=(0.0, -1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Elbow and wrist for a two-bone arm reaching toward ``target``.

    Unreachable targets are pulled onto the reachable shell along the same
    direction.  The elbow bends toward ``hint``.
    """
    s = np.asarray(shoulder, dtype=float)
    d_vec = np.asarray(target, dtype=float) - s
    d = float(np.linalg.norm(d_vec))
    u = d_vec / d if d > 0 else np.array([0.0, -1.0, 0.0])
    d = min(max(d, abs(upper - lower) + 1e-6), upper + lower - 1e-6)
    a = (upper**2 - lower**2 + d**2) / (2 * d)
    b = math.sqrt(max(upper**2 - a**2, 0.0))
    n = np.asarray(hint, dtype=float)
    n = n - (n @ u) * u
    if np.linalg.norm(n) < 1e-9:
        n = np.cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(n) < 1e-9:
            n = np.cross(u, [0.0, 0.0, 1.0])
    n /= np.linalg.norm(n)
    elbow = s + a * u + b * n
    wrist = s + d * u
    return elbow, wrist


def _min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10 - 15 * tau + 6 * tau**2)


def keyframe_path(keys: Sequence[tuple[float, Sequence[float]]]) -> Callable[[float], np.ndarray]:
    """Piecewise minimum-jerk interpolation through (time, offset) keyframes."""
    times = np.array([k[0] for k in keys])
    pts = np.array([k[1] for k in keys], dtype=float)

    def path(t: float) -> np.ndarray:
        if t <= times[0]:
            return pts[0].copy()
        if t >= times[-1]:
            return pts[-1].copy()
        i = int(np.searchsorted(times, t, side="right")) - 1
        s = _min_jerk((t - times[i]) / (times[i + 1] - times[i]))
        return pts[i] + s * (pts[i + 1] - pts[i])

    return path


@dataclass
class Person:
    height: float
    base: np.ndarray  # world position of the root at rest
    # wrist targets as offsets from the matching shoulder, or None for a hanging arm
    left: Optional[Callable[[float], np.ndarray]] = None
    right: Optional[Callable[[float], np.ndarray]] = None
    sway: float = 0.01  # m

    def __post_init__(self):
        self.rest = body_from_height(self.height)
        self.graph = default_graph()

    def pose(self, t: float) -> dict[str, np.ndarray]:
        shift = self.base + self.sway * np.array([math.sin(0.7 * t), 0.3 * math.sin(1.1 * t), math.cos(0.5 * t) - 1])
        pos = {j: kp.xyz + shift for j, kp in self.rest.keypoints.items()}
        for side, script in (("left", self.left), ("right", self.right)):
            if script is None:
                continue
            sh = f"{side}_shoulder"
            upper = self.graph.proportion[(sh, f"{side}_elbow")] * self.height
            lower = self.graph.proportion[(f"{side}_elbow", f"{side}_wrist")] * self.height
            outward = 0.4 if side == "left" else -0.4
            elbow, wrist = two_link_ik(pos[sh], pos[sh] + script(t), upper, lower, hint=(outward, -1.0, 0.0))
            pos[f"{side}_elbow"], pos[f"{side}_wrist"] = elbow, wrist
        return pos


# ---------------------------------------------------------------- tasks

OPERATOR_BASE = np.array([-0.35, -0.2, 1.6])
COLLABORATOR_BASE = np.array([0.35, -0.2, 1.8])


def _shoulder_world(person_base, height, side):
    rest = body_from_height(height)
    return person_base + rest.position(f"{side}_shoulder")


def _build_people(spec: ScenarioSpec) -> tuple[list[Person], list[Occlusion]]:
    D = spec.duration
    heights = spec.heights or (1.75, 1.65) + tuple(1.70 for _ in range(max(spec.persons - 2, 0)))
    op_h = heights[0]
    col_h = heights[1] if spec.persons > 1 else 1.65
    op_sh = _shoulder_world(OPERATOR_BASE, op_h, "left")
    col_sh = _shoulder_world(COLLABORATOR_BASE, col_h, "right")
    op_home = np.array([0.05, -0.30, -0.15])
    col_home = np.array([-0.05, -0.30, -0.15])
    col_idle = lambda t: col_home + np.array([0.0, 0.03 * math.sin(1.3 * t), 0.02 * math.sin(0.9 * t)])  # noqa: E731
    occl: list[Occlusion] = []
    wrist_elbow = ("left_wrist", "left_elbow")

    if spec.task == "t0_sinusoid":
        def op_left(t):
            x = -0.30 + 0.50 * t / D
            return np.array([x, -0.20, -0.30 + 0.08 * math.sin(2 * math.pi * t / 5.0)])
        col_right = col_idle
        occl = [Occlusion(0, ("left_wrist",), 0.30 * D, 0.30 * D + 0.33),
                Occlusion(0, wrist_elbow, 0.65 * D, 0.65 * D + 0.5)]

    elif spec.task == "t1_interaction":
        # both hands shuttle cups to a shared pyramid spot, half a cycle apart
        spot = np.array([0.0, -0.2, 1.45])
        period = 3.0

        def shuttle(home, shoulder, phase, lateral):
            def f(t):
                s = 0.5 * (1 - math.cos(2 * math.pi * t / period + phase))
                level = 0.03 * min(int(t / period), 3)
                target = spot + np.array([lateral, level, 0.0]) - shoulder
                return home + s * (target - home)
            return f

        op_left = shuttle(op_home, op_sh, 0.0, -0.05)
        col_right = shuttle(col_home, col_sh, math.pi, 0.05)
        occl = [Occlusion(0, ("left_wrist",), 0.5 * D, 0.5 * D + 0.4)]

    elif spec.task == "t2_handover_close":
        hand = np.array([0.0, -0.15, 1.5])
        period = 2.0

        def meet(home, shoulder, lateral):
            def f(t):
                s = _min_jerk(0.5 * (1 - math.cos(2 * math.pi * t / period)))
                target = hand + np.array([lateral, 0.0, 0.0]) - shoulder
                return home + s * (target - home)
            return f

        op_left = meet(op_home, op_sh, -0.03)
        col_right = meet(col_home, col_sh, 0.03)
        occl = [Occlusion(0, ("left_wrist",), 0.4 * D, 0.4 * D + 0.3)]

    elif spec.task == "t3_heavy_occlusion":
        box = np.array([0.05, -0.25, 1.55]) - op_sh
        handoff = np.array([0.08, -0.10, 1.55]) - op_sh
        keys = [
            (0.00 * D, op_home),
            (0.12 * D, op_home),
            (0.25 * D, box),
            (0.35 * D, box),
            (0.45 * D, op_home),
            (0.55 * D, handoff),
            (0.68 * D, handoff),
            (0.80 * D, box),
            (0.90 * D, op_home),
            (1.00 * D, op_home),
        ]
        op_left = keyframe_path(keys)
        col_right = keyframe_path([
            (0.0, col_home), (0.5 * D, col_home), (0.6 * D, handoff + op_sh - col_sh + [0.05, 0, 0]),
            (0.7 * D, handoff + op_sh - col_sh + [0.05, 0, 0]), (0.8 * D, col_home), (D, col_home),
        ])
        occl = [
            Occlusion(0, wrist_elbow, 0.22 * D, 0.22 * D + 0.8),
            Occlusion(0, wrist_elbow, 0.57 * D, 0.57 * D + 1.0),
            Occlusion(0, ("left_wrist",), 0.82 * D, 0.82 * D + 0.6),
        ]

    else:  # custom: constant-velocity sweep of the operator's left wrist
        def op_left(t):
            return np.array([-0.25 + 0.5 * t / D, -0.25, -0.25])
        col_right = col_idle

    people = [Person(op_h, OPERATOR_BASE.copy(), left=op_left)]
    if spec.persons > 1:
        people.append(Person(col_h, COLLABORATOR_BASE.copy(), right=col_right))
    for k in range(2, spec.persons):
        base = np.array([-0.9 + 0.6 * (k - 2), -0.2, 2.6 + 0.3 * (k % 2)])
        people.append(Person(heights[k], base))
    occl = [o for o in occl if o.track < spec.persons and o.end <= D]
    return people, occl


# ---------------------------------------------------------------- corruption


def _corrupt(truth: dict[str, np.ndarray], occluded: set, noise: NoiseSpec, rng: np.random.Generator) -> dict[str, Keypoint]:
    names = EMITTED_JOINTS
    n = len(names)
    # fixed number of draws per joint keeps the stream stable under spec edits
    u_kind = rng.random(n)
    u_absent = rng.random(n)
    gauss = rng.standard_normal((n, 3))
    direction = rng.standard_normal((n, 3))
    u_mag = rng.random(n)
    u_conf = rng.random(n)
    cm = noise.confidence_model
    out = {}
    for i, name in enumerate(names):
        p = truth[name]
        unit = direction[i] / np.linalg.norm(direction[i])
        if name in occluded:
            if u_absent[i] < noise.occluded_absent_prob:
                continue
            lo, hi = noise.hallucination_range
            pos = p + unit * (lo + (hi - lo) * u_mag[i])
            kind = "occluded"
        elif u_kind[i] < noise.dropout_rate:
            continue
        elif u_kind[i] < noise.dropout_rate + noise.outlier_rate:
            pos = p + unit * noise.outlier_magnitude
            kind = "outlier"
        else:
            pos = p + noise.gaussian_sigma * gauss[i]
            kind = "clean"
        lo, hi = cm[kind]
        out[name] = Keypoint(name, tuple(pos), lo + (hi - lo) * u_conf[i])
    return out


def generate(spec: ScenarioSpec) -> Scenario:
    """Ground truth and corrupted measurement streams for ``spec``.

    Measurement skeletons carry no identity and are shuffled within each
    frame.  Deterministic for a given spec (including seed).
    """
    people, default_occl = _build_people(spec)
    occlusions = default_occl if spec.occlusions is None else list(spec.occlusions)
    rng = np.random.default_rng(spec.seed)
    truth_frames, frames = [], []
    for t in spec.times():
        t = float(t)
        gt_skels, meas = [], []
        for pid, person in enumerate(people):
            pos = person.pose(t)
            # root and neck are joint means, matching how they are synthesized downstream
            gt_skels.append(Skeleton({j: Keypoint(j, tuple(pos[j]), 1.0) for j in JOINTS}, track_id=pid))
            hidden = {j for o in occlusions if o.track == pid and o.active(t) for j in o.joints}
            kps = _corrupt(pos, hidden, spec.noise, rng)
            if kps:
                meas.append(Skeleton(kps))
        order = rng.permutation(len(meas))
        truth_frames.append(Frame(t, tuple(gt_skels)))
        frames.append(Frame(t, tuple(meas[i] for i in order)))
    return Scenario(spec, truth_frames, frames)


def default_occlusions(spec: ScenarioSpec) -> list[Occlusion]:
    return _build_people(spec)[1]
