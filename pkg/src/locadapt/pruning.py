"""Prunings of the net, their statistics, and regret-bound calculators.

A pruning is an antichain of nodes meeting every root-to-leaf path exactly
once.  Its leaves at level ``k`` form ``E_k``; ``T_{E,k}`` counts the rounds
whose path crosses the pruning at level ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import DomainError
from .learners import LN2, WM_REGRET_CONSTANT, local_best
from .net import ROOT, Mode, RadiusSchedule, Tree, radius


class PruningError(ValueError):
    """The node set is not a pruning of the tree, or does not match the log."""


class TooManyPrunings(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"tree has {count} prunings, cap is {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Pruning:
    leaves: frozenset

    def __len__(self):
        return len(self.leaves)

    def __iter__(self):
        return iter(sorted(self.leaves))

    def level_sets(self, depth: int) -> list[list[tuple[int, int]]]:
        out = [[] for _ in range(depth)]
        for nid in sorted(self.leaves):
            out[nid[0] - 1].append(nid)
        return out

    def level_counts(self, depth: int) -> np.ndarray:
        counts = np.zeros(depth, dtype=np.int64)
        for level, _ in self.leaves:
            counts[level - 1] += 1
        return counts

    def export(self) -> str:
        return "".join(f"{level}\t{birth}\n" for level, birth in sorted(self.leaves))

    @classmethod
    def parse(cls, text: str) -> "Pruning":
        leaves = []
        for line in text.splitlines():
            if line.strip():
                level, birth = line.split("\t")
                leaves.append((int(level), int(birth)))
        return cls(frozenset(leaves))

    def describe(self, depth: int) -> str:
        counts = self.level_counts(depth)
        return f"|E|={len(self)} per-level=" + ",".join(str(int(c)) for c in counts)


def make_pruning(tree: Tree, leaves: Iterable) -> Pruning:
    p = Pruning(frozenset(tuple(v) for v in leaves))
    validate(tree, p)
    return p


def validate(tree: Tree, pruning: Pruning) -> None:
    """Raise PruningError unless every root-to-leaf path meets the set once."""
    if not pruning.leaves:
        raise PruningError("a pruning has at least one leaf")
    for nid in pruning.leaves:
        if nid == ROOT or nid not in tree.nodes:
            raise PruningError(f"{nid} is not a node of the tree")
    stack = [(ROOT, 0)]
    while stack:
        nid, hits = stack.pop()
        hits += nid in pruning.leaves
        if hits > 1:
            raise PruningError(f"two pruning leaves on the path to {nid}")
        node = tree.nodes[nid]
        if not node.children:
            if hits != 1:
                raise PruningError(f"path to {nid} misses the pruning")
            continue
        stack.extend((c, hits) for c in node.children)


def is_valid(tree: Tree, pruning: Pruning) -> bool:
    try:
        validate(tree, pruning)
    except PruningError:
        return False
    return True


def count_prunings(tree: Tree, node_id=ROOT) -> int:
    node = tree.nodes[node_id]
    prod = 1
    for c in node.children:
        prod *= count_prunings(tree, c)
    if node_id == ROOT:
        return prod
    return prod + 1 if node.children else 1


def _prunings_of(tree: Tree, node_id) -> list[frozenset]:
    node = tree.nodes[node_id]
    own = [] if node_id == ROOT else [frozenset([node_id])]
    if not node.children:
        return own
    parts = [_prunings_of(tree, c) for c in node.children]
    combos = [frozenset().union(*combo) for combo in itertools.product(*parts)]
    return own + combos


def enumerate_prunings(tree: Tree, cap: int = 100_000) -> list[Pruning]:
    """All prunings of `tree`; refuses when there are more than `cap`."""
    n = count_prunings(tree)
    if n > cap:
        raise TooManyPrunings(n, cap)
    return [Pruning(s) for s in _prunings_of(tree, ROOT)]


def trivial_prunings(tree: Tree) -> tuple[Pruning, Pruning]:
    """The all-level-1 pruning and the all-level-D pruning."""
    top = Pruning(frozenset(tree.root.children))
    bottom = Pruning(frozenset(n.id for n in tree.nodes.values() if n.level == tree.depth))
    return top, bottom


# ---------------------------------------------------------------------------
# statistics


def node_totals(log) -> dict:
    """Map node id -> (visits, cumulative online loss of its local learner)."""
    out = {}
    for k in range(log.depth):
        col = log.path_births[:, k]
        births, inv = np.unique(col, return_inverse=True)
        visits = np.bincount(inv, minlength=births.size)
        sums = np.bincount(inv, weights=log.node_loss[:, k], minlength=births.size)
        for b, n, s in zip(births, visits, sums):
            out[(k + 1, int(b))] = (int(n), float(s))
    return out


@dataclass
class PruningStats:
    depth: int
    T: int
    M_T: int
    leaf_counts: np.ndarray  # |E_k|
    visits: np.ndarray  # T_{E,k}
    level_loss: np.ndarray  # online loss of leaf learners per level
    level_best_loss: np.ndarray  # hindsight-constant loss per level
    leaf_visits: dict = field(default_factory=dict)
    leaf_loss: dict = field(default_factory=dict)
    leaf_best_loss: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.leaf_counts.sum())

    @property
    def total_loss(self) -> float:
        """Cumulative loss of the pruning's online leaf learners (Lambda_E)."""
        return float(self.level_loss.sum())

    @property
    def level_probs(self) -> np.ndarray:
        return self.leaf_counts / self.leaf_counts.sum()


def stats(tree: Tree, pruning: Pruning, log) -> PruningStats:
    validate(tree, pruning)
    from .aggregate import pruning_columns

    try:
        cols = pruning_columns(log, pruning)
    except ValueError as err:
        raise PruningError(str(err)) from None
    D = tree.depth
    totals = node_totals(log)
    visits = np.bincount(cols, minlength=D).astype(np.int64)
    level_loss = np.zeros(D)
    level_best = np.zeros(D)
    leaf_visits, leaf_loss, leaf_best = {}, {}, {}
    for nid in pruning.leaves:
        n, s = totals.get(nid, (0, 0.0))
        best = local_best(tree.nodes[nid].learner, tree.kind)[1]
        leaf_visits[nid], leaf_loss[nid], leaf_best[nid] = n, s, best
        level_loss[nid[0] - 1] += s
        level_best[nid[0] - 1] += best
    return PruningStats(D, log.T, tree.size, pruning.level_counts(D), visits, level_loss,
                        level_best, leaf_visits, leaf_loss, leaf_best)


def best_pruning(tree: Tree, log, hindsight: bool = False,
                 admissible: Callable | None = None, rtol: float = 1e-12) -> tuple[Pruning, float]:
    """Pruning minimizing the summed cumulative loss of its leaves.

    With ``hindsight=True`` a leaf is charged the loss of its best constant in
    hindsight instead of its online learner's loss.  `admissible` restricts
    which nodes may become leaves.  Ties go to the shallower cut.
    """
    totals = node_totals(log)

    def own(nid):
        if hindsight:
            return local_best(tree.nodes[nid].learner, tree.kind)[1]
        return totals.get(nid, (0, 0.0))[1]

    value: dict = {}
    choice: dict = {}
    # children before parents; every round through an internal node also
    # crosses one of its children, so no loss is left uncovered by a cut
    for nid in sorted(tree.nodes, key=lambda v: -v[0]):
        node = tree.nodes[nid]
        below = sum(value[c] for c in node.children) if node.children else math.inf
        if nid == ROOT:
            value[nid], choice[nid] = below, False
            continue
        mine = own(nid) if admissible is None or admissible(nid) else math.inf
        if mine <= below + rtol * max(1.0, abs(below)):
            value[nid], choice[nid] = mine, True
        else:
            value[nid], choice[nid] = below, False
    if not math.isfinite(value[ROOT]):
        raise PruningError("no admissible pruning exists")
    leaves, stack = [], list(tree.root.children)
    while stack:
        nid = stack.pop()
        if choice[nid]:
            leaves.append(nid)
        else:
            stack.extend(tree.nodes[nid].children)
    return Pruning(frozenset(leaves)), float(value[ROOT])


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundReport:
    tree: float
    estimation: float
    approximation: float
    cross: float = 0.0

    @property
    def total(self) -> float:
        return self.tree + self.estimation + self.approximation + self.cross

    def export(self) -> str:
        return (f"tree={self.tree:.17g}\nestimation={self.estimation:.17g}\n"
                f"approximation={self.approximation:.17g}\ncross={self.cross:.17g}\n"
                f"total={self.total:.17g}\n")


def _require(schedule: RadiusSchedule, mode: Mode):
    if schedule.mode is not mode:
        raise DomainError(f"expected a {mode.value} schedule, got {schedule.mode.value}")


def _tree_term(st: PruningStats) -> float:
    E = st.size
    return 2.0 * E * math.log(st.M_T * st.depth / E)


def lipschitz_bound(st: PruningStats, schedule: RadiusSchedule, T: int) -> BoundReport:
    _require(schedule, Mode.LIPSCHITZ)
    a = schedule.d / (schedule.d + 1)
    L = np.asarray(schedule.lipschitz_grid)
    est = 8.0 * math.log(math.e * T) * float(np.dot(st.level_probs, L ** a)) * T ** a
    approx = 2.0 * float(np.sum((L * st.visits) ** a))
    return BoundReport(_tree_term(st), est, approx)


def dimension_bound(st: PruningStats, schedule: RadiusSchedule, T: int, C: float = 1.0) -> BoundReport:
    _require(schedule, Mode.DIMENSION)
    dims = np.asarray(schedule.dim_grid, dtype=float)
    ex = dims / (1.0 + dims)
    LT = schedule.L * T
    est = 8.0 * math.log(math.e * T) * C * float(np.dot(st.level_probs, LT ** ex))
    approx = 2.0 * float(np.sum((schedule.L * st.visits) ** ex))
    return BoundReport(_tree_term(st), est, approx)


def loss_bound(st: PruningStats, schedule: RadiusSchedule, T: int,
               c_wm: float = WM_REGRET_CONSTANT, c_anh: float | None = None) -> BoundReport:
    _require(schedule, Mode.LOSS)
    from .aggregate import ANH_REGRET_CONSTANT

    if c_anh is None:
        c_anh = ANH_REGRET_CONSTANT
    d, L, D = schedule.d, schedule.L, schedule.depth
    b = d / (2.0 + d)
    tau_T = np.array([schedule.tau(k, T) for k in range(1, D + 1)])
    e_k = float(np.dot(st.level_probs, (L * tau_T) ** b))
    tau_visits = np.array([schedule.tau(k, n) for k, n in zip(range(1, D + 1), st.visits)])
    tau_sum = float(tau_visits.sum())
    E = st.size
    tree = c_anh * (math.sqrt(E * tau_sum * math.log(st.M_T * D / E) + E) + math.log(1 + T))
    est = c_wm * LN2 * e_k
    cross = 2.0 * math.sqrt(2.0 * LN2) * math.sqrt(e_k * tau_sum)
    approx = 1.5 * float(np.sum((L * tau_visits) ** ((1.0 + d) / (2.0 + d))))
    return BoundReport(tree, est, approx, cross)


def level_coefficients(schedule: RadiusSchedule, T: int) -> np.ndarray:
    """Per-level ``c_k`` such that the leaf-count bound reads ``|E| <= E[c_K]``."""
    D = schedule.depth
    if schedule.mode is Mode.LIPSCHITZ:
        a = schedule.d / (1.0 + schedule.d)
        return (np.asarray(schedule.lipschitz_grid) * T) ** a
    if schedule.mode is Mode.DIMENSION:
        dims = np.asarray(schedule.dim_grid, dtype=float)
        return (schedule.L * T) ** (dims / (1.0 + dims))
    b = schedule.d / (2.0 + schedule.d)
    return np.array([(schedule.L * schedule.tau(k, T)) ** b for k in range(1, D + 1)])


def leaf_count_check(pruning: Pruning, schedule: RadiusSchedule, T: int) -> tuple[bool, float]:
    """``|E| <= E[c_K]`` for one pruning; returns (holds, rhs - |E|)."""
    counts = pruning.level_counts(schedule.depth)
    rhs = float(np.dot(counts / counts.sum(), level_coefficients(schedule, T)))
    slack = rhs - len(pruning)
    return slack >= -1e-9, slack


def _minplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full(a.size + b.size - 1, np.inf)
    for i, v in enumerate(a):
        if np.isfinite(v):
            np.minimum(out[i:i + b.size], v + b, out=out[i:i + b.size])
    return out


def leaf_count_check_all(tree: Tree, schedule: RadiusSchedule, T: int) -> tuple[bool, float, int]:
    """Leaf-count bound over every pruning of `tree` at once.

    For each leaf total ``n`` a tree knapsack finds the least ``sum_k |E_k| c_k``;
    the bound holds for all prunings iff ``n <= min_cost(n) / n`` for every
    feasible ``n``.  Returns (holds, worst slack, |E| at the worst slack).
    """
    c = level_coefficients(schedule, T)
    # table[v][i] is the least cost of a pruning of v's subtree with i + 1 leaves
    table: dict = {}
    for nid in sorted(tree.nodes, key=lambda v: -v[0]):
        node = tree.nodes[nid]
        if node.children:
            kids = iter(node.children)
            g = table.pop(next(kids))
            for ch in kids:
                g = np.concatenate([[np.inf], _minplus(g, table.pop(ch))])
            g = g.copy()
        else:
            g = np.array([np.inf])
        if nid != ROOT:
            g[0] = min(g[0], c[nid[0] - 1])
        table[nid] = g
    g = table[ROOT]
    n = np.arange(1, g.size + 1)
    feasible = np.isfinite(g)
    slack = np.where(feasible, g / n - n, np.inf)
    j = int(np.argmin(slack))
    return bool(slack[j] >= -1e-9), float(slack[j]), int(n[j])


# ---------------------------------------------------------------------------
# admissibility


def _ball_probes(center: np.ndarray, r: float, per_axis: int = 32) -> np.ndarray:
    """64 * d deterministic points of the closed ball: +-r*s along each axis."""
    d = center.shape[0]
    fr = np.linspace(1.0 / per_axis, 1.0, per_axis) * r
    pts = []
    for j in range(d):
        for sign in (1.0, -1.0):
            p = np.repeat(center[None, :], per_axis, axis=0)
            p[:, j] += sign * fr
            pts.append(p)
    return np.concatenate(pts)


def node_admissible_lipschitz(f, tree: Tree, nid, schedule: RadiusSchedule, T: int,
                              visits=None, n_radii: int = 24, tol: float = 1e-12) -> bool:
    """Finite-resolution audit of ``|f(x_i) - f(x)| <= L_k rho(k, t)`` on the ball.

    Rounds ``t`` run from the node's birth to ``T`` on a geometric grid; probe
    points are a fixed grid inside each ball plus the logged instances
    `visits` that reached the node.
    """
    node = tree.nodes[nid]
    k = node.level
    Lk = schedule.lipschitz_grid[k - 1]
    ts = np.unique(np.concatenate([np.geomspace(node.birth, max(T, node.birth), n_radii).round(),
                                   [node.birth, max(T, node.birth)]]))
    fc = f(node.center)
    for t in ts:
        r = radius(schedule, k, t)
        pts = _ball_probes(node.center, r)
        if visits is not None and len(visits):
            near = visits[np.linalg.norm(visits - node.center, axis=1) <= r]
            pts = np.concatenate([pts, near])
        pts = pts[np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12]
        if pts.size and np.max(np.abs(np.asarray(f(pts)) - fc)) > Lk * r + tol:
            return False
    return True


def admissible_lipschitz(f, tree: Tree, pruning: Pruning, schedule: RadiusSchedule, log) -> bool:
    _require(schedule, Mode.LIPSCHITZ)
    validate(tree, pruning)
    rounds = log.node_rounds()
    for nid in pruning.leaves:
        rows = rounds.get(nid)
        vis = log.x[rows] if rows is not None else None
        if not node_admissible_lipschitz(f, tree, nid, schedule, log.T, vis):
            return False
    return True


def admissible_nodes_lipschitz(f, tree: Tree, schedule: RadiusSchedule, log) -> set:
    """Every node that may serve as a leaf of an admissible pruning for `f`."""
    rounds = log.node_rounds()
    out = set()
    for nid in tree.nodes:
        if nid == ROOT:
            continue
        rows = rounds.get(nid)
        vis = log.x[rows] if rows is not None else None
        if node_admissible_lipschitz(f, tree, nid, schedule, log.T, vis):
            out.add(nid)
    return out


def admissible_dim(tree: Tree, pruning: Pruning, schedule: RadiusSchedule, C: float, T: int) -> bool:
    """``|E_k| <= C (L T)^(d_k / (1 + d_k))`` at every level."""
    _require(schedule, Mode.DIMENSION)
    validate(tree, pruning)
    counts = pruning.level_counts(schedule.depth)
    dims = np.asarray(schedule.dim_grid, dtype=float)
    ceiling = C * (schedule.L * T) ** (dims / (1.0 + dims))
    return bool(np.all(counts <= ceiling))


def admissible_loss(st: PruningStats, tau, tol: float = 1e-9) -> bool:
    """Leaf learners at each level stay within ``tau_k(T_{E,k})``."""
    for k in range(1, st.depth + 1):
        if st.level_loss[k - 1] > tau(k, int(st.visits[k - 1])) + tol:
            return False
    return True
