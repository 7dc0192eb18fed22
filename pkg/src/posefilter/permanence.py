"""Confidence-aware particle filter that keeps keypoints alive through occlusion.

Each keypoint owns a small particle cloud.  Confident measurements correct
the cloud with a Gaussian likelihood whose covariance grows as the
measurement confidence drops; missing or low-confidence measurements switch
the keypoint to a constant-velocity extrapolation fitted on its recent
accepted measurements.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .skeleton import Keypoint, Skeleton

log = logging.getLogger(__name__)

_LOG_TINY = math.log(np.finfo(float).tiny)
_LOG_2PI = math.log(2 * math.pi)
DIM = 3


@dataclass
class PermanenceConfig:
    alpha: float = 0.01
    beta: float = 0.2
    occlusion_threshold: float = 0.4
    history: int = 50  # frames kept for the velocity fit
    particle_count: int = 200
    process_noise: np.ndarray = field(default_factory=lambda: np.eye(DIM) * 1e-4)  # m^2 per step
    resample_ess_fraction: float = 0.5
    assignment_cost_gate: float = 0.5

    def __post_init__(self):
        Q = np.asarray(self.process_noise, dtype=float)
        if Q.ndim == 0:
            Q = np.eye(DIM) * float(Q)
        elif Q.ndim == 1:
            Q = np.diag(Q)
        if Q.shape != (DIM, DIM) or not np.allclose(Q, Q.T):
            raise ValueError("process_noise must be a symmetric 3x3 matrix")
        evals, evecs = np.linalg.eigh(Q)
        if evals.min() < -1e-12:
            raise ValueError("process_noise must be positive semi-definite")
        self.process_noise = Q
        self._noise_factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 < self.occlusion_threshold < 1.0:
            raise ValueError("occlusion_threshold must be in (0, 1)")
        if self.history < 2:
            raise ValueError("history must be >= 2")
        if self.particle_count < 2:
            raise ValueError("particle_count must be >= 2")
        if not 0.0 <= self.resample_ess_fraction <= 1.0:
            raise ValueError("resample_ess_fraction must be in [0, 1]")

    @property
    def noise_factor(self) -> np.ndarray:
        return self._noise_factor


@dataclass
class KeypointFilterState:
    particles: np.ndarray  # (N, 3)
    weights: np.ndarray  # (N,)
    time: float
    history: deque  # (t, position) of accepted measurements, newest last
    occluded: bool = False
    frames_occluded: int = 0
    # extrapolation line, frozen at occlusion onset
    anchor: Optional[np.ndarray] = None
    anchor_time: float = 0.0
    velocity: Optional[np.ndarray] = None
    reinit_count: int = 0

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles


def measurement_covariance(confidence: float, cfg: PermanenceConfig) -> np.ndarray:
    return np.eye(DIM) * measurement_variance(confidence, cfg)


def measurement_variance(confidence: float, cfg: PermanenceConfig) -> float:
    return cfg.alpha ** (confidence - cfg.beta)


def _gaussian_cloud(rng: np.random.Generator, factor: np.ndarray, n: int) -> np.ndarray:
    return rng.standard_normal((n, DIM)) @ factor.T


def init_state(measurement, confidence: float, t: float, cfg: PermanenceConfig, rng: np.random.Generator) -> KeypointFilterState:
    """Spawn a cloud around ``measurement`` with covariance R(confidence)."""
    y = np.asarray(measurement, dtype=float)
    n = cfg.particle_count
    sd = math.sqrt(measurement_variance(confidence, cfg))
    particles = y + _gaussian_cloud(rng, np.eye(DIM) * sd, n)
    hist = deque([(float(t), y.copy())], maxlen=cfg.history)
    return KeypointFilterState(particles, np.full(n, 1.0 / n), float(t), hist)


def line_fit(history) -> tuple[float, np.ndarray, np.ndarray]:
    """Least-squares line through ``history``.

    Returns ``(t_last, p_last, velocity)`` where ``p_last`` is the fitted
    position at the newest timestamp.  Fewer than two samples (or a singular
    fit) give zero velocity and the newest sample as ``p_last``.
    """
    t_last, p_newest = history[-1]
    p_newest = np.asarray(p_newest, dtype=float)
    if len(history) < 2:
        return t_last, p_newest, np.zeros(DIM)
    t = np.fromiter((h[0] for h in history), float, len(history))
    p = np.array([h[1] for h in history])
    t_mean, p_mean = t.mean(), p.mean(axis=0)
    tc = t - t_mean
    denom = tc @ tc
    if denom == 0.0:
        log.warning("singular velocity fit: all timestamps equal")
        return t_last, p_newest, np.zeros(DIM)
    v = tc @ (p - p_mean) / denom
    return t_last, p_mean + v * (t_last - t_mean), v


def dynamics_fit(history) -> np.ndarray:
    """Per-axis least-squares slope of position against time (m/s)."""
    if len(history) == 0:
        return np.zeros(DIM)
    return line_fit(history)[2]


def predict(
    state: KeypointFilterState,
    dt: float,
    cfg: PermanenceConfig,
    rng: np.random.Generator,
    velocity: Optional[np.ndarray] = None,
) -> KeypointFilterState:
    """Advance particles by ``velocity * dt`` plus N(0, Q) noise, in place.

    ``velocity`` defaults to the slope fitted on the state's history.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if velocity is None:
        velocity = dynamics_fit(state.history)
    state.particles += velocity * dt
    state.particles += _gaussian_cloud(rng, cfg.noise_factor, len(state.particles))
    state.time += dt
    return state


def effective_sample_size(weights: np.ndarray) -> float:
    return 1.0 / float(weights @ weights)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (np.arange(n) + rng.random()) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions)


def update(
    state: KeypointFilterState,
    measurement,
    confidence: float,
    cfg: PermanenceConfig,
    rng: np.random.Generator,
) -> KeypointFilterState:
    """Importance-weight the particles against ``measurement``, in place.

    Resamples systematically when the effective sample size falls below
    ``resample_ess_fraction * N``.  If every likelihood underflows the cloud
    is re-spawned around the measurement.
    """
    y = np.asarray(measurement, dtype=float)
    r = measurement_variance(confidence, cfg)
    d2 = np.einsum("ij,ij->i", y - state.particles, y - state.particles) / r
    loglik = -0.5 * d2 - 0.5 * (DIM * _LOG_2PI + DIM * math.log(r))
    if loglik.max() < _LOG_TINY:
        log.info("all particle likelihoods underflow; re-spawning cloud at measurement")
        fresh = init_state(y, confidence, state.time, cfg, rng)
        state.particles, state.weights = fresh.particles, fresh.weights
        state.reinit_count += 1
    else:
        with np.errstate(divide="ignore"):
            logw = np.log(state.weights) + loglik
        w = np.exp(logw - logw.max())
        state.weights = w / w.sum()
        if effective_sample_size(state.weights) < cfg.resample_ess_fraction * len(state.weights):
            idx = systematic_resample(state.weights, rng)
            state.particles = state.particles[idx]
            state.weights = np.full(len(idx), 1.0 / len(idx))
    state.history.append((state.time, y))
    state.occluded = False
    state.frames_occluded = 0
    state.anchor = state.velocity = None
    return state


def accepts(confidence: float, assignment_cost: Optional[float], cfg: PermanenceConfig) -> bool:
    """Whether a measurement is trusted enough to correct the filter."""
    if confidence < cfg.occlusion_threshold:
        return False
    return assignment_cost is None or assignment_cost <= cfg.assignment_cost_gate


def step_keypoint(
    state: KeypointFilterState,
    observation: Optional[tuple],
    dt: float,
    cfg: PermanenceConfig,
    rng: np.random.Generator,
    assignment_cost: Optional[float] = None,
) -> tuple[KeypointFilterState, np.ndarray, bool]:
    """One filter tick: returns (state, output position, occluded flag).

    ``observation`` is ``(point, confidence)`` or None.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if observation is not None and accepts(observation[1], assignment_cost, cfg):
        point, c = observation
        predict(state, dt, cfg, rng)
        update(state, point, c, cfg, rng)
        return state, state.mean(), False

    if not state.occluded:
        state.anchor_time, state.anchor, state.velocity = line_fit(state.history)
        state.occluded = True
    predict(state, dt, cfg, rng, velocity=state.velocity)
    state.frames_occluded += 1
    out = state.anchor + state.velocity * (state.time - state.anchor_time)
    return state, out, True


def filter_skeleton(
    states: dict[str, KeypointFilterState],
    skeleton: Optional[Skeleton],
    timestamp: float,
    cfg: PermanenceConfig,
    rng: np.random.Generator,
) -> Skeleton:
    """Advance every joint state of one track to ``timestamp``.

    ``states`` is updated in place; joints seen for the first time with a
    trusted measurement get a fresh state.  The refined skeleton holds every
    joint that has a state; occluded joints are reported with confidence 0.
    """
    cost = skeleton.assignment_cost if skeleton is not None else None
    observed = dict(skeleton.keypoints) if skeleton is not None else {}
    out: dict[str, Keypoint] = {}
    for name in sorted(set(states) | set(observed)):
        kp = observed.get(name)
        state = states.get(name)
        if state is None:
            if kp is not None and accepts(kp.confidence, cost, cfg):
                states[name] = init_state(kp.position, kp.confidence, timestamp, cfg, rng)
                out[name] = Keypoint(name, kp.position, kp.confidence)
            continue
        dt = timestamp - state.time
        obs = (kp.position, kp.confidence) if kp is not None else None
        _, pos, occluded = step_keypoint(state, obs, dt, cfg, rng, cost)
        out[name] = Keypoint(name, tuple(pos), 0.0 if occluded else kp.confidence)
    track_id = skeleton.track_id if skeleton is not None else None
    return Skeleton(out, track_id=track_id, assignment_cost=cost,
                    estimated_height=skeleton.estimated_height if skeleton is not None else None)


class PermanenceFilter:
    """Per-track banks of keypoint filters sharing one random stream."""

    def __init__(self, cfg: Optional[PermanenceConfig] = None, seed: int = 0):
        self.cfg = cfg or PermanenceConfig()
        self.rng = np.random.default_rng(seed)
        self.banks: dict[int, dict[str, KeypointFilterState]] = {}

    def step(self, track_id: int, skeleton: Optional[Skeleton], timestamp: float) -> Skeleton:
        bank = self.banks.setdefault(track_id, {})
        refined = filter_skeleton(bank, skeleton, timestamp, self.cfg, self.rng)
        return refined.replace(track_id=track_id)

    def drop(self, track_id: int) -> None:
        self.banks.pop(track_id, None)
