"""Tracking quality of the operator's wrist: MAE / STD / ACC per task and method.

    python scripts/run_table1.py --seeds 0 1 2 --out results/table1.json
"""
import argparse
import json
from pathlib import Path

import numpy as np

from posefilter.metrics import Trajectory, evaluate
from posefilter.pipeline import PipelineConfig, run_stream
from posefilter.sim import ScenarioSpec, generate

METHODS = ("none", "kalman1", "kalman2", "permanence")
TASKS = ("t0", "t1", "t2", "t3")


def score(task, seed, duration):
    sc = generate(ScenarioSpec(task=task, seed=seed, duration=duration))
    truth = sc.truth[0]["left_wrist"]
    out = {}
    for m in METHODS:
        cfg = PipelineConfig(filter=m, seed=seed)
        res = run_stream(sc.frames, cfg)
        pred = Trajectory.from_samples([(t, p - np.asarray(cfg.safety_offset)) for t, p in res.target])
        out[m] = evaluate(pred, truth, ee=Trajectory.from_samples(res.ee)).to_dict()
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--tasks", nargs="+", default=list(TASKS))
    ap.add_argument("--seeds", nargs="+", type=int, default=[0])
    ap.add_argument("--duration", type=float, default=20.0)
    ap.add_argument("--out", default=None, help="optional JSON dump of per-seed results")
    args = ap.parse_args()

    results = {t: {s: score(t, s, args.duration) for s in args.seeds} for t in args.tasks}
    print(f"{'task':<5}{'method':<12}{'MAE mm':>9}{'STD mm':>9}{'ACC m/s2':>10}")
    for t in args.tasks:
        for m in METHODS:
            rows = [results[t][s][m] for s in args.seeds]
            mean = {k: np.mean([r[k] for r in rows]) for k in ("mae", "std", "acc")}
            print(f"{t:<5}{m:<12}{mean['mae']:9.2f}{mean['std']:9.2f}{mean['acc']:10.3f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
