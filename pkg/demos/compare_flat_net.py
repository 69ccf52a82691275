"""Locally adaptive tree against a flat net tuned to the worst slope.

Writes ``<prefix>.<target>.dat`` with columns ``t la hm`` (cumulative regret
against the clean target) for plotting, and prints seed-averaged totals.

    python3 demos/compare_flat_net.py [prefix] [seeds]
"""

import sys

import numpy as np

from locadapt import LAConfig, RadiusSchedule, StreamSpec, TargetFunction, gen_stream, run_hm, run_la
from locadapt.bench import regret_vs_clean

prefix = sys.argv[1] if len(sys.argv) > 1 else "compare"
seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 3
grid = [2.0 ** k for k in range(1, 6)]

for target in ("mostly-flat", "uniformly-rough"):
    f = TargetFunction.preset(target, grid[0], grid[-1])
    la_runs, hm_runs = [], []
    for seed in range(seeds):
        stream = gen_stream(StreamSpec(T=10_000, d=1, seed=seed, noise=0.5), f)
        la_runs.append(regret_vs_clean(run_la(stream, LAConfig(RadiusSchedule.lipschitz(grid, 1)))))
        hm_runs.append(regret_vs_clean(run_hm(stream, grid[-1], 1)))
    la, hm = np.mean(la_runs, axis=0), np.mean(hm_runs, axis=0)
    print(f"{target:>16}: LA {la[-1]:7.2f}   HM {hm[-1]:7.2f}")
    with open(f"{prefix}.{target}.dat", "w") as fh:
        for t in range(99, len(la), 100):
            fh.write(f"{t + 1} {la[t]:.6f} {hm[t]:.6f}\n")
