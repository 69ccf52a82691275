"""Sleeping-experts aggregation competes with every pruning at once.

A small square-loss run is small enough to list all of its prunings; for
each one we compare the aggregator's regret with 2|E| ln(M_T/|E|).  The same
is done for an absolute-loss run aggregated by AdaNormalHedge, against its
data-dependent envelope.
"""

import math

import numpy as np

from locadapt import (ANH_REGRET_CONSTANT, LAConfig, LossKind, RadiusSchedule, StreamSpec,
                      TargetFunction, gen_stream, run_la)
from locadapt.aggregate import pruning_columns, tree_regret
from locadapt.pruning import enumerate_prunings

f = TargetFunction.preset("mostly-flat", 1.0, 8.0)
stream = gen_stream(StreamSpec(T=200, d=1, seed=4, noise=0.2), f)
log = run_la(stream, LAConfig(RadiusSchedule.lipschitz([0.1, 0.5], d=1)))
print(f"square loss: {log.M_T} nodes")
for E in enumerate_prunings(log.tree)[:8]:
    n = len(E)
    print(f"  |E|={n:>2}  regret {tree_regret(log, E):7.3f}  <=  {2 * n * math.log(log.M_T / n):7.3f}")

binary = gen_stream(StreamSpec(T=300, d=1, seed=4, noise=0.3, classification=True), f)
log = run_la(binary, LAConfig(RadiusSchedule.local_loss("pow", 2, 1, 1.0), LossKind.ABSOLUTE))
rows = np.arange(log.T)
print(f"absolute loss: {log.M_T} nodes")
for E in enumerate_prunings(log.tree)[:8]:
    n = len(E)
    lam = log.node_loss[rows, pruning_columns(log, E)].sum()
    env = ANH_REGRET_CONSTANT * (math.sqrt(n * lam * math.log(log.M_T / n) + n) + math.log(1 + log.T))
    print(f"  |E|={n:>2}  regret {tree_regret(log, E):7.3f}  <=  {env:7.3f}")
