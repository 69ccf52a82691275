import itertools
import math

import numpy as np
import pytest

from locadapt.bench import LAConfig, StreamSpec, TargetFunction, gen_stream, run_la
from locadapt.core import LossKind
from locadapt.net import ROOT, RadiusSchedule, Tree, build_tree
from locadapt.pruning import (Pruning, PruningError, PruningStats, TooManyPrunings,
                              admissible_dim, admissible_lipschitz, admissible_loss,
                              admissible_nodes_lipschitz, best_pruning, count_prunings,
                              dimension_bound, enumerate_prunings, is_valid,
                              leaf_count_check, leaf_count_check_all, level_coefficients,
                              lipschitz_bound, loss_bound, make_pruning,
                              node_admissible_lipschitz, stats, trivial_prunings, validate)


def tree_from(edges, depth):
    """Tree from (level, birth, parent_birth) triples listed parents first."""
    tree = Tree(depth, 1)
    for level, birth, parent in edges:
        parent_id = ROOT if level == 1 else (level - 1, parent)
        tree.create(tree[parent_id], np.array([birth / 100.0]), birth)
    return tree


def brute_force_prunings(tree):
    """Every node subset that meets each root-to-leaf path exactly once."""
    nodes = [n for n in tree.nodes if n != ROOT]
    paths = [tree.path_to(leaf.id) for leaf in tree.leaves()]
    out = set()
    for r in range(1, len(nodes) + 1):
        for subset in itertools.combinations(nodes, r):
            s = set(subset)
            if all(sum(v in s for v in p) == 1 for p in paths):
                out.add(frozenset(s))
    return out


def random_tree(rng, n_nodes, depth):
    edges, by_level = [], {0: [0]}
    for b in range(1, n_nodes + 1):
        level = 1 if b == 1 else int(rng.integers(1, depth + 1))
        while level > 1 and not by_level.get(level - 1):
            level -= 1
        parent = 0 if level == 1 else int(rng.choice(by_level[level - 1]))
        edges.append((level, b, parent))
        by_level.setdefault(level, []).append(b)
    return tree_from(edges, depth)


def test_path_tree_has_depth_prunings():
    tree = tree_from([(1, 1, 0), (2, 2, 1), (3, 3, 2), (4, 4, 3)], 4)
    assert count_prunings(tree) == 4
    assert len(enumerate_prunings(tree)) == 4


def test_two_children_example():
    tree = tree_from([(1, 1, 0), (2, 2, 1), (2, 3, 1)], 2)
    got = {E.leaves for E in enumerate_prunings(tree)}
    assert got == {frozenset({(1, 1)}), frozenset({(2, 2), (2, 3)})}


@pytest.mark.parametrize("seed", range(5))
def test_count_matches_brute_force(seed):
    tree = random_tree(np.random.default_rng(seed), 12, 3)
    brute = brute_force_prunings(tree)
    assert count_prunings(tree) == len(brute)
    assert {E.leaves for E in enumerate_prunings(tree)} == brute


def test_enumeration_cap():
    tree = random_tree(np.random.default_rng(0), 12, 3)
    with pytest.raises(TooManyPrunings) as err:
        enumerate_prunings(tree, cap=1)
    assert err.value.count == count_prunings(tree)


def test_validation_is_loud():
    tree = tree_from([(1, 1, 0), (2, 2, 1), (2, 3, 1)], 2)
    for bad in ({(1, 1), (2, 2)}, {(2, 2)}, set(), {(3, 9)}):
        with pytest.raises(PruningError):
            validate(tree, Pruning(frozenset(bad)))
        assert not is_valid(tree, Pruning(frozenset(bad)))
    assert make_pruning(tree, [(1, 1)]).leaves == {(1, 1)}


def test_export_roundtrip():
    p = Pruning(frozenset({(1, 3), (2, 7), (2, 10)}))
    assert Pruning.parse(p.export()) == p
    assert p.export().splitlines()[0] == "1\t3"


def run(T=300, depth=3, seed=0, noise=0.1, target="mostly-flat", grid=None):
    grid = grid or [2.0 ** k for k in range(1, depth + 1)]
    f = TargetFunction.preset(target, grid[0], grid[-1])
    stream = gen_stream(StreamSpec(T, 1, seed, noise=noise), f)
    return run_la(stream, LAConfig(RadiusSchedule.lipschitz(grid, 1))), f


def test_stats_trivial_prunings():
    log, _ = run()
    top, bottom = trivial_prunings(log.tree)
    st_top, st_bottom = stats(log.tree, top, log), stats(log.tree, bottom, log)
    assert st_top.visits[0] == log.T and st_top.visits[1:].sum() == 0
    assert st_bottom.visits[-1] == log.T and st_bottom.visits[:-1].sum() == 0
    assert st_bottom.leaf_counts[-1] == log.tree.level_counts[-1]


def test_stats_replay_oracle():
    log, _ = run(T=120, seed=3)
    rng = np.random.default_rng(1)
    # a mixed pruning: each level-1 node randomly kept or cut at the bottom
    leaves = set()
    for n1 in log.tree.root.children:
        if rng.random() < 0.5:
            leaves.add(n1)
        else:
            stack = [n1]
            while stack:
                v = stack.pop()
                kids = log.tree[v].children
                if kids:
                    stack.extend(kids)
                else:
                    leaves.add(v)
    E = make_pruning(log.tree, leaves)
    st = stats(log.tree, E, log)
    visits = np.zeros(log.depth, dtype=int)
    level_loss = np.zeros(log.depth)
    for i in range(log.T):
        for k, v in enumerate(log.path(i)):
            if v in leaves:
                visits[k] += 1
                level_loss[k] += log.node_loss[i, k]
    assert np.array_equal(st.visits, visits)
    assert np.allclose(st.level_loss, level_loss, atol=1e-12)
    assert st.visits.sum() == log.T
    assert st.total_loss == pytest.approx(sum(st.leaf_loss.values()))


@pytest.mark.parametrize("hindsight", [False, True])
@pytest.mark.parametrize("seed", range(4))
def test_best_pruning_matches_enumeration(seed, hindsight):
    log, _ = run(T=60, depth=2, seed=seed, grid=[1.0, 4.0])
    prunings = enumerate_prunings(log.tree)
    E, value = best_pruning(log.tree, log, hindsight=hindsight)
    def cost(P):
        st = stats(log.tree, P, log)
        return (st.level_best_loss if hindsight else st.level_loss).sum()
    assert value == pytest.approx(min(cost(P) for P in prunings), abs=1e-12)
    assert cost(E) == pytest.approx(value, abs=1e-12)


def test_best_pruning_prefers_shallow_on_ties():
    stream = gen_stream(StreamSpec(80, 1, 0), TargetFunction.constant(0.5))
    log = run_la(stream, LAConfig(RadiusSchedule.lipschitz([2.0, 8.0, 32.0], 1)))
    E, value = best_pruning(log.tree, log)
    assert value == pytest.approx(0.0)
    assert E == trivial_prunings(log.tree)[0]


def test_best_pruning_admissible_filter():
    log, _ = run(T=100)
    deepest = {n.id for n in log.tree.leaves()}
    E, _ = best_pruning(log.tree, log, admissible=lambda v: v in deepest)
    assert E.leaves == frozenset(deepest)
    with pytest.raises(PruningError):
        best_pruning(log.tree, log, admissible=lambda v: False)


def make_stats(counts, visits, M_T, T, level_loss=None):
    counts = np.asarray(counts)
    level_loss = np.zeros(len(counts)) if level_loss is None else np.asarray(level_loss, float)
    return PruningStats(len(counts), T, M_T, counts, np.asarray(visits), level_loss,
                        level_loss.copy())


def test_lipschitz_bound_single_level():
    T, E1, M = 400, 7, 30
    st = make_stats([E1, 0], [T, 0], M, T)
    b = lipschitz_bound(st, RadiusSchedule.lipschitz([1.0, 3.0], 1), T)
    assert b.tree == pytest.approx(2 * E1 * math.log(M * 2 / E1))
    assert b.estimation == pytest.approx(8 * math.log(math.e * T) * T ** 0.5)
    assert b.approximation == pytest.approx(2 * T ** 0.5)
    assert b.total == pytest.approx(b.tree + b.estimation + b.approximation)


def test_lipschitz_bound_two_levels_independent():
    st = make_stats([1, 3], [90, 10], 12, 100)
    b = lipschitz_bound(st, RadiusSchedule.lipschitz([1.0, 4.0], 1), 100)
    # hand evaluation
    e_k = 0.25 * 1.0 + 0.75 * 2.0
    assert b.estimation == pytest.approx(8 * math.log(math.e * 100) * e_k * 10.0)
    assert b.approximation == pytest.approx(2 * (math.sqrt(90) + math.sqrt(40)))
    assert b.tree == pytest.approx(2 * 4 * math.log(12 * 2 / 4))
    assert b.cross == 0.0


def test_lipschitz_bound_monotone():
    sched = RadiusSchedule.lipschitz([1.0, 2.0, 4.0], 1)
    st = make_stats([2, 3, 4], [50, 30, 20], 40, 100)
    base = lipschitz_bound(st, sched, 100).total
    for k in range(3):
        bumped = make_stats([2, 3, 4], np.array([50, 30, 20]) + np.eye(3, dtype=int)[k], 40, 100)
        assert lipschitz_bound(bumped, sched, 100).total > base
        grid = [1.0, 2.0, 4.0]
        grid[k] *= 1.01
        assert lipschitz_bound(st, RadiusSchedule.lipschitz(grid, 1), 100).total > base


def test_bound_mode_mismatch():
    st = make_stats([1], [10], 1, 10)
    with pytest.raises(ValueError):
        lipschitz_bound(st, RadiusSchedule.dimension([1], 1.0), 10)


def test_dimension_bound_examples():
    T = 256
    st = make_stats([0, 5], [0, T], 9, T)
    b = dimension_bound(st, RadiusSchedule.dimension([2, 1], 1.0), T, C=1.0)
    assert b.approximation == pytest.approx(2 * T ** 0.5)
    st = make_stats([2, 2], [200, 56], 9, T)
    b = dimension_bound(st, RadiusSchedule.dimension([2, 1], 3.0), T, C=2.0)
    e_k = 0.5 * (3 * T) ** (2 / 3) + 0.5 * (3 * T) ** 0.5
    assert b.estimation == pytest.approx(8 * math.log(math.e * T) * 2.0 * e_k)
    assert b.approximation == pytest.approx(2 * ((3 * 200) ** (2 / 3) + (3 * 56) ** 0.5))
    # single level with d_1 = d reduces to the flat shape
    st = make_stats([4], [T], 4, T)
    b = dimension_bound(st, RadiusSchedule.dimension([1], 1.0), T)
    assert b.estimation == pytest.approx(8 * math.log(math.e * T) * T ** 0.5)


def test_loss_bound_examples():
    from locadapt.aggregate import ANH_REGRET_CONSTANT
    from locadapt.learners import LN2, WM_REGRET_CONSTANT

    T = 100
    sched = RadiusSchedule.local_loss("pow", 2, 1, 1.0)
    st = make_stats([2, 0], [100, 0], 6, T)
    b = loss_bound(st, sched, T)
    tau1 = 10.0  # 100 ** (1/2)
    e_k = tau1 ** (1 / 3)
    assert b.estimation == pytest.approx(WM_REGRET_CONSTANT * LN2 * e_k)
    assert b.approximation == pytest.approx(1.5 * tau1 ** (2 / 3))
    assert b.cross == pytest.approx(2 * math.sqrt(2 * LN2) * math.sqrt(e_k * tau1))
    assert b.tree == pytest.approx(ANH_REGRET_CONSTANT * (
        math.sqrt(2 * tau1 * math.log(6 * 2 / 2) + 2) + math.log(101)))
    # linear tau: every level behaves like the flat learner
    lin = RadiusSchedule.local_loss("linear", 2, 1, 1.0)
    b = loss_bound(make_stats([1, 1], [60, 40], 4, T), lin, T)
    assert b.approximation == pytest.approx(1.5 * (60 ** (2 / 3) + 40 ** (2 / 3)))


def test_admissible_lipschitz_examples():
    log, f = run(T=200, target="uniformly-rough")
    sched = log.config.schedule
    top, bottom = trivial_prunings(log.tree)
    const = TargetFunction.constant(0.3)
    assert admissible_lipschitz(const, log.tree, top, sched, log)
    assert admissible_lipschitz(const, log.tree, bottom, sched, log)
    assert not admissible_lipschitz(f, log.tree, top, sched, log)
    assert admissible_lipschitz(f, log.tree, bottom, sched, log)


def test_matched_pruning_is_admissible():
    log, f = run(T=400, depth=3, noise=0.0)
    sched = log.config.schedule
    ok = admissible_nodes_lipschitz(f, log.tree, sched, log)
    E, _ = best_pruning(log.tree, log, hindsight=True, admissible=lambda v: v in ok)
    assert admissible_lipschitz(f, log.tree, E, sched, log)
    # nodes born well inside the flat part qualify at level 1
    flat = [v for v in log.tree.root.children
            if log.tree[v].center[0] - sched.radius(1, v[1]) > 0.1]
    assert flat and all(node_admissible_lipschitz(f, log.tree, v, sched, log.T) for v in flat)


def test_admissible_dim_examples():
    sched = RadiusSchedule.dimension([1], 1.0)
    tree = tree_from([(1, b, 0) for b in (1, 2, 3, 4)], 1)
    three = tree_from([(1, b, 0) for b in (1, 2, 3)], 1)
    # (L T)^(1/2) = 10 at T = 100, so C = 0.3 makes the ceiling exactly 3
    assert admissible_dim(three, trivial_prunings(three)[0], sched, 0.3, 100)
    assert not admissible_dim(tree, trivial_prunings(tree)[0], sched, 0.3, 100)
    two = RadiusSchedule.dimension([2, 1], 1.0)
    path_tree = tree_from([(1, 1, 0), (2, 2, 1)], 2)
    assert admissible_dim(path_tree, Pruning(frozenset({(1, 1)})), two, 1.0, 100)


def test_admissible_loss_examples():
    tau = RadiusSchedule.local_loss("pow", 2, 1, 1.0).tau
    st = make_stats([0, 4], [0, 50], 6, 50, level_loss=[0.0, 17.0])
    assert admissible_loss(st, tau)
    assert admissible_loss(make_stats([3, 0], [50, 0], 6, 50), tau)
    # level 1 allows sqrt(50) ~ 7.07 total loss
    assert not admissible_loss(make_stats([3, 0], [50, 0], 6, 50, level_loss=[12.0, 0.0]), tau)


def test_deepest_pruning_always_loss_admissible():
    f = TargetFunction.preset("uniformly-rough", 2.0, 8.0)
    stream = gen_stream(StreamSpec(200, 1, 5, noise=0.4, classification=True), f)
    sched = RadiusSchedule.local_loss("pow", 3, 1, 1.0)
    log = run_la(stream, LAConfig(sched, LossKind.ABSOLUTE))
    _, bottom = trivial_prunings(log.tree)
    assert admissible_loss(stats(log.tree, bottom, log), sched.tau)


def test_leaf_count_single_leaf_and_t1():
    sched = RadiusSchedule.lipschitz([1.0, 2.0], 1)
    tree, _ = build_tree([[0.2]], sched)
    top, bottom = trivial_prunings(tree)
    ok, slack = leaf_count_check(top, sched, 1)
    assert ok and slack == pytest.approx(0.0)
    ok, slack = leaf_count_check(bottom, sched, 1)
    assert ok and slack == pytest.approx(math.sqrt(2) - 1)


def test_leaf_count_flat_counterexample():
    # two balls are forced but the inequality allows only sqrt(2)
    sched = RadiusSchedule.lipschitz([1.0], 1)
    tree, _ = build_tree([[0.0], [1.0]], sched)
    assert tree.size == 2
    ok, slack = leaf_count_check(trivial_prunings(tree)[0], sched, 2)
    assert not ok and slack == pytest.approx(math.sqrt(2) - 2)


@pytest.mark.parametrize("seed", range(4))
def test_leaf_count_all_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, 14, 3)
    sched = RadiusSchedule.lipschitz([1.0, 2.0, 4.0], 1)
    T = int(rng.integers(5, 40))
    worst = min(leaf_count_check(E, sched, T)[1] for E in enumerate_prunings(tree))
    ok, slack, _ = leaf_count_check_all(tree, sched, T)
    assert slack == pytest.approx(worst, abs=1e-9)
    assert ok == (worst >= -1e-9)


def test_level_coefficients_modes():
    assert np.allclose(level_coefficients(RadiusSchedule.lipschitz([1.0, 4.0], 1), 100), [10, 20])
    assert np.allclose(level_coefficients(RadiusSchedule.dimension([2, 1], 1.0), 64), [16, 8])
    loss = RadiusSchedule.local_loss("linear", 2, 1, 1.0)
    assert np.allclose(level_coefficients(loss, 1000), [10, 10])
