"""Measure the two empirical constants frozen in the package.

* WM_REGRET_CONSTANT: worst value of (regret - 2 sqrt(2 ln2 best)) / ln2 for
  the two-expert self-confident learner over adversarial, blocky and random
  binary label sequences.
* ANH_REGRET_CONSTANT: worst ratio of AdaNormalHedge tree regret to
  sqrt(|E| Lambda_E ln(M_T/|E|) + |E|) + ln(1 + T) over every pruning of
  small loss-mode trees.

Run:  python3 tools/measure_constants.py
The printed maxima are rounded up by hand before being frozen.
"""

import math

import numpy as np

from locadapt.aggregate import pruning_columns
from locadapt.bench import LAConfig, StreamSpec, TargetFunction, gen_stream, run_la
from locadapt.core import LossKind
from locadapt.learners import LN2, WmState, wm_predict
from locadapt.net import RadiusSchedule
from locadapt.pruning import TooManyPrunings, enumerate_prunings


def wm_excess(labels) -> float:
    s = WmState()
    total, worst = 0.0, -math.inf
    for y in labels:
        p = wm_predict(s)
        total += abs(y - p)
        s.update(y)
        best = min(s.loss0, s.loss1)
        worst = max(worst, (total - best - 2 * math.sqrt(2 * LN2 * best)) / LN2)
    return worst


def wm_greedy_adversary(T: int) -> float:
    s = WmState()
    total, worst = 0.0, -math.inf
    for _ in range(T):
        p = wm_predict(s)
        y = 1.0 if p <= 0.5 else 0.0
        total += abs(y - p)
        s.update(y)
        best = min(s.loss0, s.loss1)
        worst = max(worst, (total - best - 2 * math.sqrt(2 * LN2 * best)) / LN2)
    return worst


def measure_wm() -> float:
    worst = max(wm_greedy_adversary(T) for T in (10, 100, 1000, 10000))
    rng = np.random.default_rng(0)
    for q in (0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0):
        for _ in range(50):
            worst = max(worst, wm_excess((rng.random(500) < q).astype(float)))
    fib = (1, 2, 3, 5, 8, 13, 21, 34, 55, 89)
    for a in fib:
        for b in fib:
            worst = max(worst, wm_excess(([1.0] * a + [0.0] * b) * (3000 // (a + b))))
    for a in (1, 3, 10, 30, 100, 300, 1000, 3000):
        for b in (1, 3, 10, 30, 100, 300, 1000, 3000, 6000):
            worst = max(worst, wm_excess([1.0] * a + [0.0] * b))
    return worst


def anh_ratios(log, cap: int = 20_000):
    """Yield (regret, envelope unit) for every pruning of the run's tree."""
    try:
        prunings = enumerate_prunings(log.tree, cap)
    except TooManyPrunings:
        return
    rows = np.arange(log.T)
    M = log.M_T
    for E in prunings:
        cols = pruning_columns(log, E)
        lam = float(log.node_loss[rows, cols].sum())
        regret = float(log.loss.sum()) - lam
        n = len(E)
        unit = math.sqrt(n * lam * math.log(M / n) + n) + math.log(1 + log.T)
        yield regret, unit


def small_loss_runs(seeds=range(40)):
    for seed in seeds:
        rng = np.random.default_rng(seed)
        depth = int(rng.integers(2, 4))
        T = int(rng.integers(50, 301))
        tau = "pow" if seed % 2 else "linear"
        target = ("mostly-flat", "uniformly-rough", "constant")[seed % 3]
        f = TargetFunction.preset(target, 2.0, 8.0)
        noise = float(rng.choice([0.0, 0.2, 0.5]))
        stream = gen_stream(StreamSpec(T, 1, seed, noise=noise, classification=True), f)
        schedule = RadiusSchedule.local_loss(tau, depth, 1, 1.0)
        yield run_la(stream, LAConfig(schedule, LossKind.ABSOLUTE))


def measure_anh() -> float:
    worst = -math.inf
    for log in small_loss_runs(range(400)):
        for regret, unit in anh_ratios(log):
            worst = max(worst, regret / unit)
    return worst


if __name__ == "__main__":
    print(f"wm  worst excess / ln2 : {measure_wm():.4f}")
    print(f"anh worst regret ratio : {measure_anh():.4f}")
