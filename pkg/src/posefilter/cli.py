"""Command-line harness: ``posefilter {sim,run,eval}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .metrics import NoOverlap, Trajectory, distances, evaluate, write_distance_csv, write_report
from .pipeline import FILTER_ALIASES, run_stream
from .sim import TASK_ALIASES, NoiseSpec, ScenarioSpec, generate

log = logging.getLogger("posefilter")


def cmd_sim(args) -> int:
    noise = NoiseSpec.noiseless() if args.noiseless else NoiseSpec()
    spec = ScenarioSpec(task=args.task, duration=args.duration, rate=args.rate,
                        persons=args.persons, noise=noise, seed=args.seed)
    sc = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_stream(sc.truth_frames, out / "truth.jsonl")
    io.write_stream(sc.frames, out / "measurements.jsonl")
    log.info("wrote %d frames to %s", len(sc.frames), out)
    return 0


def cmd_run(args) -> int:
    cfg = io.load_config(args.config)
    cfg = cfg.with_filter(args.filter)
    if args.seed is not None:
        cfg.seed = args.seed
    frames = io.read_stream(args.input)
    t0 = time.perf_counter()
    res = run_stream(frames, cfg)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_stream(res.refined, out / "refined.jsonl")
    io.write_trajectory_csv(res.target, out / "target.csv")
    io.write_trajectory_csv(res.ee, out / "ee.csv")
    if elapsed > 0:
        log.info("%s: %d frames at %.1f frames/s", cfg.filter, len(frames), len(frames) / elapsed)
    return 0


def _label(path: Path, taken: set) -> str:
    label = path.parent.name if path.stem in ("refined", "measurements") and path.parent.name else path.stem
    base, k = label, 1
    while label in taken:
        k += 1
        label = f"{base}_{k}"
    taken.add(label)
    return label


def associate_track(frames, truth: Trajectory, joint: str) -> Optional[int]:
    """Track id whose ``joint`` stays closest (median distance) to the truth trajectory."""
    ids = sorted({sk.track_id for fr in frames for sk in fr.skeletons if sk.track_id is not None})
    best, best_d = None, np.inf
    for tid in ids:
        traj = io.joint_trajectory(frames, tid, joint)
        try:
            _, d = distances(traj, truth)
        except NoOverlap:
            continue
        if np.median(d) < best_d:
            best, best_d = tid, float(np.median(d))
    return best


def cmd_eval(args) -> int:
    truth_frames = io.read_stream(args.truth)
    truth = io.joint_trajectory(truth_frames, args.person, args.joint, "truth")
    if len(truth) == 0:
        raise ValueError(f"truth has no {args.joint} for person {args.person}")
    if args.ee and len(args.ee) != len(args.pred):
        raise ValueError("--ee needs one file per --pred")
    reports, rows, taken = {}, [], set()
    for i, p in enumerate(args.pred):
        path = Path(p)
        label = _label(path, taken)
        frames = io.read_stream(path)
        tid = associate_track(frames, truth, args.joint)
        if tid is None:
            raise ValueError(f"{path}: no track overlaps the truth")
        pred = io.joint_trajectory(frames, tid, args.joint, label)
        ee = io.read_trajectory_csv(args.ee[i]) if args.ee else None
        reports[label] = evaluate(pred, truth, ee)
        t, d = distances(pred, truth)
        rows.extend((label, ti, di * 1000) for ti, di in zip(t, d))
    write_report(reports, args.report)
    if args.csv:
        write_distance_csv(rows, args.csv)
    w = max(len(k) for k in reports)
    print(f"{'method':<{w}}  {'MAE mm':>8}  {'STD mm':>8}  {'ACC m/s2':>9}  {'safety mm':>9}")
    for k, r in reports.items():
        s = f"{r.safety_std:9.2f}" if r.safety_std is not None else f"{'-':>9}"
        print(f"{k:<{w}}  {r.mae:8.2f}  {r.std:8.2f}  {r.acc:9.3f}  {s}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="posefilter", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sim", help="generate truth and measurement streams")
    s.add_argument("--task", default="t0", choices=sorted(TASK_ALIASES) + ["custom"])
    s.add_argument("--duration", type=float, default=20.0, help="seconds")
    s.add_argument("--rate", type=float, default=30.0, help="Hz")
    s.add_argument("--persons", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noiseless", action="store_true")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_sim)

    r = sub.add_parser("run", help="filter a measurement stream")
    r.add_argument("--input", required=True)
    r.add_argument("--filter", default="perm", choices=["none"] + sorted(FILTER_ALIASES))
    r.add_argument("--config", default=None, help="YAML config; defaults when omitted")
    r.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score refined streams against truth")
    e.add_argument("--truth", required=True)
    e.add_argument("--pred", nargs="+", required=True)
    e.add_argument("--ee", nargs="+", default=None, help="end-effector CSVs, one per --pred")
    e.add_argument("--report", required=True, help="JSON report path")
    e.add_argument("--csv", default=None, help="per-sample distance CSV")
    e.add_argument("--joint", default="left_wrist")
    e.add_argument("--person", type=int, default=0, help="truth person id")
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"posefilter {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
