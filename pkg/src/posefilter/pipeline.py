"""Spatial evaluation -> identity tracking -> smoothing -> tracking target."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .baselines import KalmanConfig, KalmanTracker
from .permanence import PermanenceConfig, PermanenceFilter
from .skeleton import JOINT_SET, ROOT, Frame, Skeleton
from .spatial import SpatialConfig, evaluate_frame, root_distance
from .tracker import TrackerConfig, TrackRegistry, track_frame

FILTERS = ("none", "kalman1", "kalman2", "permanence")
FILTER_ALIASES = {"kf1": "kalman1", "kf2": "kalman2", "perm": "permanence"}


class OutOfOrderFrame(ValueError):
    pass


@dataclass
class PipelineConfig:
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    filter: str = "permanence"
    permanence: PermanenceConfig = field(default_factory=PermanenceConfig)
    kalman1: KalmanConfig = field(default_factory=lambda: KalmanConfig(order=1))
    kalman2: KalmanConfig = field(default_factory=lambda: KalmanConfig(order=2))
    target_joint: str = "left_wrist"
    operator_track: Optional[int] = None  # None -> nearest root during warmup
    warmup_frames: int = 30
    safety_offset: tuple[float, float, float] = (0.150, 0.0, 0.150)  # m
    follower_gain: float = 5.0  # 1/s
    seed: int = 0

    def __post_init__(self):
        self.filter = FILTER_ALIASES.get(self.filter, self.filter)
        if self.filter not in FILTERS:
            raise ValueError(f"unknown filter {self.filter!r}")
        if self.target_joint not in JOINT_SET:
            raise ValueError(f"unknown target joint {self.target_joint!r}")
        self.safety_offset = tuple(float(v) for v in self.safety_offset)
        if len(self.safety_offset) != 3 or not np.all(np.isfinite(self.safety_offset)):
            raise ValueError("safety_offset must be 3 finite values")
        if self.follower_gain <= 0:
            raise ValueError("follower_gain must be positive")

    def with_filter(self, name: str) -> "PipelineConfig":
        return replace(self, filter=name)


class Pipeline:
    """One stream's worth of state; feed frames in timestamp order."""

    def __init__(self, cfg: Optional[PipelineConfig] = None):
        self.cfg = cfg or PipelineConfig()
        self.registry = TrackRegistry()
        self.last_time: Optional[float] = None
        self.frames_seen = 0
        self.operator: Optional[int] = self.cfg.operator_track
        self.locked = self.cfg.operator_track is not None
        self._root_stats: dict[int, list[float]] = {}
        if self.cfg.filter == "permanence":
            self.smoother = PermanenceFilter(self.cfg.permanence, seed=self.cfg.seed)
        elif self.cfg.filter == "kalman1":
            self.smoother = KalmanTracker(self.cfg.kalman1)
        elif self.cfg.filter == "kalman2":
            self.smoother = KalmanTracker(self.cfg.kalman2)
        else:
            self.smoother = None

    def labeled(self, frame: Frame) -> list[Skeleton]:
        """Spatial evaluation and tracking only (no smoothing)."""
        spatial = evaluate_frame(frame, self.cfg.spatial)
        return track_frame(self.registry, spatial.skeletons, self.cfg.tracker,
                           empty_fill=self.cfg.spatial.distance_threshold)

    def process_frame(self, frame: Frame) -> tuple[Frame, Optional[np.ndarray]]:
        """Return the refined frame and the tracking target (None if unavailable)."""
        if self.last_time is not None and not frame.timestamp > self.last_time:
            raise OutOfOrderFrame(f"frame at t={frame.timestamp} does not follow t={self.last_time}")
        self.last_time = frame.timestamp
        self.frames_seen += 1

        labeled = self.labeled(frame)
        by_id = {sk.track_id: sk for sk in labeled}
        if self.smoother is None:
            outputs = by_id
        else:
            for tid in [t for t in self.smoother.banks if t not in self.registry.tracks]:
                self.smoother.drop(tid)
            outputs = {
                tid: self.smoother.step(tid, by_id.get(tid), frame.timestamp)
                for tid in sorted(set(self.registry.tracks) | set(by_id))
            }
        refined = Frame(frame.timestamp, tuple(outputs[sk.track_id] for sk in labeled))

        self._select_operator(labeled)
        return refined, self._target(outputs)

    def _select_operator(self, labeled: list[Skeleton]) -> None:
        if self.locked:
            return
        for sk in labeled:
            if ROOT in sk:
                self._root_stats.setdefault(sk.track_id, []).append(root_distance(sk, self.cfg.spatial))
        if self._root_stats:
            self.operator = min(self._root_stats, key=lambda tid: (np.mean(self._root_stats[tid]), tid))
        if self.frames_seen >= self.cfg.warmup_frames and self.operator is not None:
            self.locked = True

    def _target(self, outputs: dict[int, Skeleton]) -> Optional[np.ndarray]:
        sk = outputs.get(self.operator) if self.operator is not None else None
        if sk is None or self.cfg.target_joint not in sk:
            return None
        return sk.position(self.cfg.target_joint) + np.asarray(self.cfg.safety_offset)


@dataclass
class FollowerState:
    ee_position: np.ndarray
    gain: float = 5.0  # 1/s

    def __post_init__(self):
        self.ee_position = np.asarray(self.ee_position, dtype=float)
        if self.gain <= 0:
            raise ValueError("gain must be positive")


def follow(state: FollowerState, target, dt: float) -> FollowerState:
    """One Euler step of the linear system ee' = gain * (target - ee)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ee = state.ee_position + state.gain * (np.asarray(target, dtype=float) - state.ee_position) * dt
    return FollowerState(ee, state.gain)


@dataclass
class RunResult:
    refined: list[Frame]
    target: list[tuple[float, np.ndarray]]
    ee: list[tuple[float, np.ndarray]]


def run_stream(frames, cfg: Optional[PipelineConfig] = None) -> RunResult:
    """Drive a pipeline and an end-effector follower over a whole stream.

    The follower starts on the first available target and holds the last
    target through frames where none is available.
    """
    pipe = Pipeline(cfg)
    refined, targets, ee_traj = [], [], []
    follower: Optional[FollowerState] = None
    goal = None
    last_t = None
    for frame in frames:
        out, target = pipe.process_frame(frame)
        refined.append(out)
        if target is not None:
            targets.append((frame.timestamp, target))
            goal = target
        if goal is not None:
            if follower is None:
                follower = FollowerState(goal.copy(), pipe.cfg.follower_gain)
            else:
                follower = follow(follower, goal, frame.timestamp - last_t)
            ee_traj.append((frame.timestamp, follower.ee_position.copy()))
        last_t = frame.timestamp
    return RunResult(refined, targets, ee_traj)
