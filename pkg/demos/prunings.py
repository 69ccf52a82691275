"""Best pruning in hindsight and the regret bound it certifies.

The best pruning is found by a bottom-up dynamic program.  Restricting leaves
to balls where the target really is L_k-smooth gives the admissible
pruning that the Lipschitz-mode bound is stated for.
"""

from locadapt import LAConfig, RadiusSchedule, StreamSpec, TargetFunction, gen_stream, run_la
from locadapt.bench import regret_curve
from locadapt.pruning import (admissible_nodes_lipschitz, best_pruning, count_prunings,
                              leaf_count_check_all, lipschitz_bound, stats)

grid = [2.0, 4.0, 8.0, 16.0, 32.0]
f = TargetFunction.preset("mostly-flat", grid[0], grid[-1])
stream = gen_stream(StreamSpec(T=4000, d=1, seed=1, noise=0.3), f)
log = run_la(stream, LAConfig(RadiusSchedule.lipschitz(grid, d=1)))
schedule = log.config.schedule

print(f"{log.M_T} nodes, a number of prunings with {len(str(count_prunings(log.tree)))} digits")
allowed = admissible_nodes_lipschitz(f, log.tree, schedule, log)
E, value = best_pruning(log.tree, log, hindsight=True, admissible=allowed.__contains__)
st = stats(log.tree, E, log)
print("leaves per level:", st.leaf_counts.tolist())
print("rounds per level:", st.visits.tolist())

bound = lipschitz_bound(st, schedule, log.T)
print(f"regret vs pruning {regret_curve(log, E)[-1]:.2f}")
print(f"bound: tree {bound.tree:.1f} + estimation {bound.estimation:.1f} "
      f"+ approximation {bound.approximation:.1f} = {bound.total:.1f}")

holds, slack, n = leaf_count_check_all(log.tree, schedule, log.T)
print(f"leaf-count inequality over all prunings: holds={holds}, worst slack {slack:.2f} at |E|={n}")
