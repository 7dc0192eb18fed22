"""Spread of the wrist to end-effector distance (safety std, mm) per task and method.

The end effector follows the target (wrist + safety offset) with a first-order
linear system; a steadier target keeps the commanded distance steadier.

    python scripts/run_table2.py --seeds 0 1
"""
import argparse

import numpy as np

from posefilter.metrics import Trajectory, safety_std
from posefilter.pipeline import PipelineConfig, run_stream
from posefilter.sim import ScenarioSpec, generate

METHODS = ("none", "kalman1", "kalman2", "permanence")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--tasks", nargs="+", default=["t0", "t1", "t2", "t3"])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0])
    ap.add_argument("--duration", type=float, default=20.0)
    args = ap.parse_args()

    table = {m: [] for m in METHODS}
    for task in args.tasks:
        vals = {m: [] for m in METHODS}
        for seed in args.seeds:
            sc = generate(ScenarioSpec(task=task, seed=seed, duration=args.duration))
            wrist = sc.truth[0]["left_wrist"]
            for m in METHODS:
                res = run_stream(sc.frames, PipelineConfig(filter=m, seed=seed))
                vals[m].append(safety_std(wrist, Trajectory.from_samples(res.ee)))
        for m in METHODS:
            table[m].append(np.mean(vals[m]))
    print(f"{'method':<12}" + "".join(f"{t:>9}" for t in args.tasks))
    for m in METHODS:
        print(f"{m:<12}" + "".join(f"{v:9.2f}" for v in table[m]))


if __name__ == "__main__":
    main()
