"""Linear Kalman baselines: constant velocity (order 1) and constant acceleration (order 2).

State layout per keypoint is ``[x, y, z, vx, vy, vz(, ax, ay, az)]``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .skeleton import Frame, Keypoint, Skeleton

log = logging.getLogger(__name__)


@dataclass
class KalmanConfig:
    order: int = 1
    # white-noise acceleration (order 1, m/s^2) or jerk (order 2, m/s^3)
    process_sigma: Optional[float] = None
    measurement_sigma: float = 0.05  # m
    initial_sigma: tuple[float, ...] = (0.05, 1.0, 5.0)  # position, velocity, acceleration

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.process_sigma is None:
            self.process_sigma = 2.0 if self.order == 1 else 20.0
        self.initial_sigma = tuple(self.initial_sigma)


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray
    order: int
    time: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]


def _block(order: int, dt: float) -> np.ndarray:
    k = order + 1
    F = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            F[i, j] = dt ** (j - i) / math.factorial(j - i)
    return F


def transition(order: int, dt: float) -> np.ndarray:
    return np.kron(_block(order, dt), np.eye(3))


def process_noise(order: int, dt: float, sigma: float) -> np.ndarray:
    """Discrete white-noise model driven on the highest derivative."""
    g = np.array([dt ** (order + 1 - i) / math.factorial(order + 1 - i) for i in range(order + 1)])
    return np.kron(np.outer(g, g) * sigma**2, np.eye(3))


def kf_init(measurement, cfg: KalmanConfig, t: float = 0.0) -> KalmanState:
    n = 3 * (cfg.order + 1)
    mean = np.zeros(n)
    mean[:3] = measurement
    var = np.repeat(np.square(cfg.initial_sigma[: cfg.order + 1]), 3)
    return KalmanState(mean, np.diag(var), cfg.order, t)


def kf_predict(state: KalmanState, dt: float, cfg: Optional[KalmanConfig] = None, Q: Optional[np.ndarray] = None) -> KalmanState:
    """Propagate mean and covariance by ``dt``.

    Process noise comes from ``Q`` when given, else from ``cfg``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if Q is None:
        cfg = cfg or KalmanConfig(order=state.order)
        Q = process_noise(state.order, dt, cfg.process_sigma)
    F = transition(state.order, dt)
    P = F @ state.covariance @ F.T + Q
    return KalmanState(F @ state.mean, 0.5 * (P + P.T), state.order, state.time + dt)


def kf_update(state: KalmanState, measurement, measurement_sigma: float) -> KalmanState:
    """Position-only correction in Joseph form."""
    n = len(state.mean)
    H = np.zeros((3, n))
    H[:, :3] = np.eye(3)
    R = np.eye(3) * measurement_sigma**2
    P = state.covariance
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    innov = np.asarray(measurement, dtype=float) - state.mean[:3]
    IKH = np.eye(n) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    if np.linalg.eigvalsh(P_new).min() < -1e-10:
        log.warning("covariance lost positive semi-definiteness after update")
    return KalmanState(state.mean + K @ innov, P_new, state.order, state.time)


class KalmanTracker:
    """Independent per-keypoint Kalman filters for every track id.

    Every present keypoint is used as a measurement regardless of its
    confidence; absent keypoints coast on the motion model.
    """

    def __init__(self, cfg: Optional[KalmanConfig] = None):
        self.cfg = cfg or KalmanConfig()
        self.banks: dict[int, dict[str, KalmanState]] = {}

    def step(self, track_id: int, skeleton: Optional[Skeleton], timestamp: float) -> Skeleton:
        bank = self.banks.setdefault(track_id, {})
        observed = dict(skeleton.keypoints) if skeleton is not None else {}
        out = {}
        for name in sorted(set(bank) | set(observed)):
            kp = observed.get(name)
            state = bank.get(name)
            if state is None:
                state = kf_init(kp.position, self.cfg, timestamp)
            else:
                state = kf_predict(state, timestamp - state.time, self.cfg)
                if kp is not None:
                    state = kf_update(state, kp.position, self.cfg.measurement_sigma)
            bank[name] = state
            out[name] = Keypoint(name, tuple(state.position), kp.confidence if kp is not None else 0.0)
        if skeleton is None:
            return Skeleton(out, track_id=track_id)
        return skeleton.replace(keypoints=out, track_id=track_id)

    def drop(self, track_id: int) -> None:
        self.banks.pop(track_id, None)


def kf_track_skeletons(frames, cfg: Optional[KalmanConfig] = None):
    """Filter a stream of tracker-labeled frames; yields refined frames.

    Tracks missing from a frame coast but are not emitted for that frame.
    """
    tracker = KalmanTracker(cfg)
    for frame in frames:
        seen = {sk.track_id: sk for sk in frame.skeletons}
        refined = {}
        for tid in sorted(set(tracker.banks) | set(seen)):
            refined[tid] = tracker.step(tid, seen.get(tid), frame.timestamp)
        yield Frame(frame.timestamp, tuple(refined[sk.track_id] for sk in frame.skeletons))
