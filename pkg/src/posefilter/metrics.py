"""Trajectory error metrics and rigid alignment."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np


class NoOverlap(ValueError):
    pass


class TooShort(ValueError):
    pass


class Degenerate(ValueError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray  # (n,) seconds, strictly increasing
    positions: np.ndarray  # (n, 3) meters
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise ValueError("times and positions differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory timestamps must strictly increase")

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def from_samples(cls, samples, label: str = "") -> "Trajectory":
        samples = list(samples)
        if not samples:
            return cls(np.zeros(0), np.zeros((0, 3)), label)
        t, p = zip(*samples)
        return cls(np.array(t), np.array(p), label)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "Trajectory":
        return Trajectory(self.times, self.positions @ np.asarray(rotation).T + translation, self.label)


@dataclass
class Paired:
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray


def align_timestamps(a: Trajectory, b: Trajectory, max_gap: float = 1 / 60) -> Paired:
    """Pair each sample of ``a`` with the nearest sample of ``b`` within ``max_gap``.

    Each ``b`` sample is used at most once (closest ``a`` wins).
    """
    if len(a) == 0 or len(b) == 0:
        raise NoOverlap("empty trajectory")
    idx = np.searchsorted(b.times, a.times)
    lo = np.clip(idx - 1, 0, len(b) - 1)
    hi = np.clip(idx, 0, len(b) - 1)
    pick = np.where(np.abs(b.times[hi] - a.times) < np.abs(b.times[lo] - a.times), hi, lo)
    gap = np.abs(b.times[pick] - a.times)
    best: dict[int, int] = {}
    for i in np.flatnonzero(gap <= max_gap):
        j = int(pick[i])
        if j not in best or gap[i] < gap[best[j]]:
            best[j] = int(i)
    if not best:
        raise NoOverlap("no samples within max_gap")
    ia = np.array(sorted(best.values()))
    ib = pick[ia]
    return Paired(a.times[ia], a.positions[ia], b.positions[ib])


def distances(a: Trajectory, b: Trajectory, max_gap: float = 1 / 60) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair times and Euclidean distances (meters)."""
    p = align_timestamps(a, b, max_gap)
    return p.times, np.linalg.norm(p.a - p.b, axis=1)


def mae(a: Trajectory, b: Trajectory, max_gap: float = 1 / 60) -> float:
    """Mean Euclidean distance in millimeters."""
    return float(distances(a, b, max_gap)[1].mean() * 1000)


def std(a: Trajectory, b: Trajectory, max_gap: float = 1 / 60) -> float:
    """Population standard deviation of the Euclidean distance, millimeters."""
    return float(distances(a, b, max_gap)[1].std() * 1000)


def second_derivative(traj: Trajectory) -> Trajectory:
    """Central second difference on a possibly non-uniform grid (interior samples)."""
    if len(traj) < 3:
        raise TooShort("need at least 3 samples for a second derivative")
    t, x = traj.times, traj.positions
    h1 = (t[1:-1] - t[:-2])[:, None]
    h2 = (t[2:] - t[1:-1])[:, None]
    d2 = 2 * ((x[2:] - x[1:-1]) / h2 - (x[1:-1] - x[:-2]) / h1) / (h1 + h2)
    return Trajectory(t[1:-1], d2, traj.label)


def acc(a: Trajectory, b: Trajectory, max_gap: float = 1 / 60) -> float:
    """Mean Euclidean distance between second derivatives, m/s^2."""
    p = align_timestamps(a, b, max_gap)
    if len(p.times) < 3:
        raise TooShort("need at least 3 paired samples")
    da, db = second_derivative(a), second_derivative(b)
    q = align_timestamps(da, db, max_gap)
    return float(np.linalg.norm(q.a - q.b, axis=1).mean())


def safety_std(wrist: Trajectory, ee: Trajectory, max_gap: float = 1 / 60) -> float:
    """Spread (population std, mm) of the wrist to end-effector distance."""
    return std(wrist, ee, max_gap)


@dataclass
class MetricReport:
    mae: float  # mm
    std: float  # mm
    acc: float  # m/s^2
    sample_count: int
    safety_std: Optional[float] = None  # mm

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(pred: Trajectory, truth: Trajectory, ee: Optional[Trajectory] = None, max_gap: float = 1 / 60) -> MetricReport:
    t, d = distances(pred, truth, max_gap)
    return MetricReport(
        mae=float(d.mean() * 1000),
        std=float(d.std() * 1000),
        acc=acc(pred, truth, max_gap),
        sample_count=len(d),
        safety_std=safety_std(truth, ee, max_gap) if ee is not None else None,
    )


def write_report(reports: dict[str, MetricReport], path) -> None:
    with open(path, "w") as fh:
        json.dump({k: r.to_dict() for k, r in reports.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_distance_csv(rows: Sequence[tuple[str, float, float]], path) -> None:
    """Rows of (label, time s, distance mm)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "t", "distance_mm"])
        for label, t, d in rows:
            w.writerow([label, repr(float(t)), repr(float(d))])


@dataclass
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def kabsch_align(source, target) -> RigidTransform:
    """Least-squares proper rigid transform mapping ``source`` onto ``target``.

    Both are (n, 3) arrays of corresponding points, n >= 3 and not collinear.
    """
    P = np.asarray(source, dtype=float)
    Q = np.asarray(target, dtype=float)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[1] != 3:
        raise ValueError("source and target must both be (n, 3)")
    if len(P) < 3:
        raise Degenerate("need at least 3 correspondences")
    pc, qc = P.mean(axis=0), Q.mean(axis=0)
    P0, Q0 = P - pc, Q - qc
    sv = np.linalg.svd(P0, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-12 * sv[0]:
        raise Degenerate("points are coincident or collinear")
    H = P0.T @ Q0
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, qc - R @ pc)


def rmsd(a, b) -> float:
    return float(np.sqrt(np.mean(np.sum((np.asarray(a) - np.asarray(b)) ** 2, axis=1))))
