"""JSONL frame streams, trajectory CSVs and YAML configuration."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np
import yaml

from .baselines import KalmanConfig
from .metrics import Trajectory
from .permanence import PermanenceConfig
from .pipeline import PipelineConfig
from .skeleton import Frame, Keypoint, Skeleton
from .spatial import SpatialConfig
from .tracker import TrackerConfig

ENV_PREFIX = "POSEFILTER_"


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class NonMonotoneTimestamp(ParseError):
    pass


# ---------------------------------------------------------------- streams


def skeleton_to_record(sk: Skeleton) -> dict:
    rec: dict = {}
    if sk.track_id is not None:
        rec["id"] = sk.track_id
    if sk.assignment_cost is not None:
        rec["cost"] = sk.assignment_cost
    if sk.estimated_height is not None:
        rec["h"] = sk.estimated_height
    rec["kps"] = {name: [*kp.position, kp.confidence] for name, kp in sk.keypoints.items()}
    return rec


def frame_to_line(frame: Frame) -> str:
    rec = {"t": frame.timestamp, "skeletons": [skeleton_to_record(s) for s in frame.skeletons]}
    return json.dumps(rec, separators=(",", ":"), allow_nan=False)


def _finite(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {v!r}")
    return float(v)


def record_to_skeleton(rec: Mapping) -> Skeleton:
    kps = []
    for name, vals in rec["kps"].items():
        if len(vals) != 4:
            raise ValueError(f"{name}: expected [x, y, z, c]")
        x, y, z, c = (_finite(v) for v in vals)
        kps.append(Keypoint(name, (x, y, z), c))
    tid = rec.get("id")
    if tid is not None and (isinstance(tid, bool) or not isinstance(tid, int)):
        raise ValueError(f"track id must be an integer, got {tid!r}")
    cost = rec.get("cost")
    h = rec.get("h")
    return Skeleton.from_keypoints(
        kps,
        track_id=tid,
        assignment_cost=_finite(cost) if cost is not None else None,
        estimated_height=_finite(h) if h is not None else None,
    )


def line_to_frame(line: str) -> Frame:
    rec = json.loads(line)
    if not isinstance(rec, dict) or "t" not in rec or "skeletons" not in rec:
        raise ValueError("record needs 't' and 'skeletons'")
    return Frame(_finite(rec["t"]), tuple(record_to_skeleton(s) for s in rec["skeletons"]))


def iter_stream(path) -> Iterator[Frame]:
    """Frames in file order; blank lines are skipped."""
    last_t = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                frame = line_to_frame(line)
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise ParseError(lineno, str(exc)) from exc
            if last_t is not None and not frame.timestamp > last_t:
                raise NonMonotoneTimestamp(lineno, f"timestamp {frame.timestamp} does not follow {last_t}")
            last_t = frame.timestamp
            yield frame


def read_stream(path) -> list[Frame]:
    return list(iter_stream(path))


def write_stream(frames: Iterable[Frame], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(frame_to_line(frame))
            fh.write("\n")


def joint_trajectory(frames: Iterable[Frame], track_id: int, joint: str, label: str = "") -> Trajectory:
    samples = []
    for fr in frames:
        for sk in fr.skeletons:
            if sk.track_id == track_id and joint in sk:
                samples.append((fr.timestamp, sk.keypoints[joint].position))
    return Trajectory.from_samples(samples, label)


# ---------------------------------------------------------------- trajectories


def write_trajectory_csv(samples: Iterable[tuple[float, np.ndarray]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z"])
        for t, p in samples:
            w.writerow([repr(float(t))] + [repr(float(v)) for v in p])


def read_trajectory_csv(path, label: str = "") -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return Trajectory.from_samples(
        ((float(r["t"]), (float(r["x"]), float(r["y"]), float(r["z"]))) for r in rows), label
    )


# ---------------------------------------------------------------- config

_SECTIONS = {
    "spatial": SpatialConfig,
    "tracker": TrackerConfig,
    "permanence": PermanenceConfig,
    "kalman1": KalmanConfig,
    "kalman2": KalmanConfig,
}
_PIPELINE_KEYS = ("filter", "target_joint", "operator_track", "warmup_frames", "safety_offset", "follower_gain", "seed")


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = getattr(cfg, name)
        out[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
    out["pipeline"] = {k: _plain(getattr(cfg, k)) for k in _PIPELINE_KEYS}
    return out


def _env_overrides(data: dict, environ: Mapping[str, str]) -> dict:
    sections = list(_SECTIONS) + ["pipeline"]
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):].lower()
        for sec in sections:
            if rest.startswith(sec + "_"):
                data.setdefault(sec, {})[rest[len(sec) + 1:]] = yaml.safe_load(raw)
                break
        else:
            raise ValueError(f"environment override {key} names no config section")
    return data


def config_from_dict(data: Mapping) -> PipelineConfig:
    unknown = set(data) - set(_SECTIONS) - {"pipeline"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        values = dict(data.get(name) or {})
        if name.startswith("kalman"):
            values.setdefault("order", int(name[-1]))
        valid = {f.name for f in dataclasses.fields(cls)}
        bad = set(values) - valid
        if bad:
            raise ValueError(f"unknown keys in [{name}]: {sorted(bad)}")
        kwargs[name] = cls(**values)
    pipe = dict(data.get("pipeline") or {})
    bad = set(pipe) - set(_PIPELINE_KEYS)
    if bad:
        raise ValueError(f"unknown keys in [pipeline]: {sorted(bad)}")
    return PipelineConfig(**kwargs, **pipe)


def load_config(path: Optional[os.PathLike] = None, environ: Optional[Mapping[str, str]] = None) -> PipelineConfig:
    """Read a YAML config (defaults when ``path`` is None) and apply env overrides.

    Overrides look like ``POSEFILTER_<SECTION>_<KEY>=<yaml value>``, e.g.
    ``POSEFILTER_SPATIAL_DISTANCE_THRESHOLD=2.5``.
    """
    data: dict = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must contain a mapping")
    data = {k: dict(v or {}) for k, v in data.items()}
    data = _env_overrides(data, os.environ if environ is None else environ)
    return config_from_dict(data)


def dump_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
