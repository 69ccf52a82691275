"""Grow a hierarchical net online and look at how each level fills up.

Deeper levels use larger Lipschitz guesses and therefore shrink their radii
faster; the script prints the per-level center counts as the stream goes on
and writes the final tree in the line-oriented export format.

    python3 demos/grow_tree.py [out.tree.txt]
"""

import sys

from locadapt import RadiusSchedule, StreamSpec, TargetFunction, gen_stream, radius
from locadapt.net import Tree, covering_audit, export_tree, propagate
from locadapt.bench import LAConfig, run_la

grid = [2.0, 4.0, 8.0, 16.0, 32.0]
schedule = RadiusSchedule.lipschitz(grid, d=1)

print("radius per level at a few rounds")
for t in (1, 10, 100, 1000, 10000):
    print(f"  t={t:>5}: " + "  ".join(f"{radius(schedule, k, t):.4f}" for k in range(1, 6)))

f = TargetFunction.preset("mostly-flat", grid[0], grid[-1])
stream = gen_stream(StreamSpec(T=5000, d=1, seed=3, noise=0.2), f)

# propagate can be driven by hand; run_la below does the same plus learning
tree = Tree(len(grid), 1)
for example in stream:
    path = propagate(tree, example.x, example.t, schedule)
    if example.t in (10, 100, 1000, 5000):
        print(f"after {example.t:>4} rounds: centers per level {tree.level_counts[1:]}")
print("last active path:", path.nodes)

log = run_la(stream, LAConfig(schedule))
audit = covering_audit(log.tree, log, schedule)
print(f"cover ok: {audit.covering_ok}, packing ok: {audit.packing_ok}, nodes: {log.M_T}")

if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write(export_tree(log.tree))
    print("tree written to", sys.argv[1])
