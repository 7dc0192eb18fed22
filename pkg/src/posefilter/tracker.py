"""Identity tracking across frames via linear assignment on a distance+confidence cost."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .skeleton import ROOT, Skeleton


@dataclass
class TrackerConfig:
    step_constant: float = 0.5
    max_track_age: int = 90  # frames without assignment before a track is dropped

    def __post_init__(self):
        if self.step_constant <= 0:
            raise ValueError("step_constant must be positive")
        if self.max_track_age < 1:
            raise ValueError("max_track_age must be >= 1")


def _pairwise(prev, curr, cell, empty_fill):
    out = np.full((len(prev), len(curr)), np.nan)
    for i, a in enumerate(prev):
        for j, b in enumerate(curr):
            common = [k for k in a.keypoints if k in b.keypoints]
            if common:
                out[i, j] = cell(a, b, common)
    if out.size:
        empty = np.isnan(out)
        if empty.all():
            out[:] = empty_fill
        elif empty.any():
            out[empty] = np.nanmax(out)
    return out


def _mean_distance(a: Skeleton, b: Skeleton, common) -> float:
    pa = np.array([a.keypoints[k].position for k in common])
    pb = np.array([b.keypoints[k].position for k in common])
    return float(np.linalg.norm(pa - pb, axis=1).mean())


def _mean_conf_gap(a: Skeleton, b: Skeleton, common) -> float:
    return float(np.mean([abs(a.keypoints[k].confidence - b.keypoints[k].confidence) for k in common]))


def distance_matrix(prev: Sequence[Skeleton], curr: Sequence[Skeleton], empty_fill: float = 3.0) -> np.ndarray:
    """Mean Euclidean distance over shared joints, shape (len(prev), len(curr)).

    Cells with no shared joint take the largest filled cell, or ``empty_fill``
    when every cell is empty.
    """
    return _pairwise(prev, curr, _mean_distance, empty_fill)


def confidence_matrix(prev: Sequence[Skeleton], curr: Sequence[Skeleton], empty_fill: float = 3.0) -> np.ndarray:
    """Mean absolute confidence difference over shared joints; same fill rule as distance_matrix."""
    return _pairwise(prev, curr, _mean_conf_gap, empty_fill)


def combined_cost(D: np.ndarray, C: np.ndarray, step_constant: float) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    C = np.asarray(C, dtype=float)
    if D.shape != C.shape:
        raise ValueError(f"shape mismatch: {D.shape} vs {C.shape}")
    s = D + C
    return s + (s - step_constant > 0).astype(float)


def solve_assignment(M) -> list[tuple[int, int]]:
    """Minimum-cost matching of size min(n, m), as sorted (row, col) pairs.

    Rectangular inputs are padded to square with ``max(M) + 1``; pairs that
    land on padding are dropped.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        return []
    n, m = M.shape
    k = max(n, m)
    padded = np.full((k, k), M.max() + 1.0)
    padded[:n, :m] = M
    rows, cols = linear_sum_assignment(padded)
    return sorted((int(i), int(j)) for i, j in zip(rows, cols) if i < n and j < m)


@dataclass
class Track:
    skeleton: Skeleton
    missed: int = 0


@dataclass
class TrackRegistry:
    tracks: dict[int, Track] = field(default_factory=dict)
    next_id: int = 0

    def live_ids(self) -> list[int]:
        return sorted(self.tracks)


def _spawn_key(sk: Skeleton):
    # order-independent key so that fresh ids do not depend on list order
    anchor = sk.keypoints.get(ROOT)
    pos = anchor.position if anchor else tuple(np.mean([kp.position for kp in sk.keypoints.values()], axis=0))
    return (pos, tuple(sorted(sk.keypoints)))


def track_frame(
    registry: TrackRegistry,
    skeletons: Sequence[Skeleton],
    cfg: TrackerConfig,
    empty_fill: float = 3.0,
) -> list[Skeleton]:
    """Label ``skeletons`` with persistent track ids, updating ``registry`` in place.

    Matched skeletons carry the id and ``assignment_cost``; unmatched ones open
    new tracks.  Returned list preserves input order.
    """
    ids = registry.live_ids()
    prev = [registry.tracks[i].skeleton for i in ids]
    labeled: list[Skeleton | None] = [None] * len(skeletons)

    matched_tracks = set()
    if prev and skeletons:
        D = distance_matrix(prev, skeletons, empty_fill)
        C = confidence_matrix(prev, skeletons, empty_fill)
        M = combined_cost(D, C, cfg.step_constant)
        for i, j in solve_assignment(M):
            tid = ids[i]
            labeled[j] = skeletons[j].replace(track_id=tid, assignment_cost=float(M[i, j]))
            matched_tracks.add(tid)

    fresh = sorted((j for j, s in enumerate(labeled) if s is None), key=lambda j: _spawn_key(skeletons[j]))
    for j in fresh:
        labeled[j] = skeletons[j].replace(track_id=registry.next_id, assignment_cost=None)
        registry.next_id += 1

    for tid in ids:
        if tid not in matched_tracks:
            registry.tracks[tid].missed += 1
            if registry.tracks[tid].missed > cfg.max_track_age:
                del registry.tracks[tid]
    for sk in labeled:
        registry.tracks[sk.track_id] = Track(sk)
    return labeled
