"""Hierarchical epsilon-net grown online over the unit ball.

The net is a rooted tree of depth ``D``.  Level ``k`` holds balls whose radius
``radius(schedule, k, t)`` shrinks with the round ``t``; every node's children
form a net of the part of the instance sequence that was routed through it.
Each round an instance descends from the root, activating the closest child
at every level or creating a new ball centered at the instance, which yields a
root-to-leaf path of awake experts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import DomainError, LossKind, check_instance
from .learners import new_learner

ROOT = (0, 0)


class Mode(enum.Enum):
    LIPSCHITZ = "lipschitz"
    DIMENSION = "dimension"
    LOSS = "loss"


class TauGrid:
    """Per-level local-loss envelopes ``tau_k(n)``.

    ``"pow"`` is ``n ** (1 / (D - k + 1))`` and ``"linear"`` is ``n`` at every
    level.  A custom callable ``fn(k, n)`` may be supplied instead; it is
    checked for ordering when wrapped by `RadiusSchedule`.
    """

    def __init__(self, kind: str | Callable[[int, float], float], depth: int):
        self.depth = depth
        if callable(kind):
            self.kind = "custom"
            self._fn = kind
        elif kind in ("pow", "linear"):
            self.kind = kind
            self._fn = None
        else:
            raise DomainError(f"unknown tau kind {kind!r}")

    def __call__(self, k: int, n: float) -> float:
        if n <= 0:
            return 0.0
        if self.kind == "linear":
            return float(n)
        if self.kind == "pow":
            return float(n) ** (1.0 / (self.depth - k + 1))
        return float(self._fn(k, n))

    def __repr__(self):
        return f"TauGrid({self.kind!r}, depth={self.depth})"


@dataclass(frozen=True)
class RadiusSchedule:
    """Radius tuning function ``rho(k, t)`` for one of the three modes.

    lipschitz: ``(L_k t) ** (-1 / (d + 1))``
    dimension: ``(L t) ** (-1 / (1 + d_k))``
    loss:      ``(L tau_k(t)) ** (-1 / (2 + d))``
    """

    mode: Mode
    depth: int
    d: int
    lipschitz_grid: tuple[float, ...] = ()
    L: float = 1.0
    dim_grid: tuple[int, ...] = ()
    tau: TauGrid | None = None

    def __post_init__(self):
        if self.depth < 1:
            raise DomainError("depth must be a positive integer")
        if self.d < 1:
            raise DomainError("dimension must be a positive integer")
        if self.mode is Mode.LIPSCHITZ:
            grid = self.lipschitz_grid
            if len(grid) != self.depth:
                raise DomainError(f"lipschitz grid has {len(grid)} entries, depth is {self.depth}")
            if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise DomainError("lipschitz grid must be positive and strictly increasing")
        elif self.mode is Mode.DIMENSION:
            dims = self.dim_grid
            if len(dims) != self.depth:
                raise DomainError(f"dimension grid has {len(dims)} entries, depth is {self.depth}")
            if dims[0] != self.d or dims[-1] < 1 or any(b >= a for a, b in zip(dims, dims[1:])):
                raise DomainError("dimension grid must start at d and strictly decrease to >= 1")
            if self.L <= 0:
                raise DomainError("L must be positive")
        elif self.mode is Mode.LOSS:
            if self.tau is None or self.tau.depth != self.depth:
                raise DomainError("loss mode needs a tau grid of matching depth")
            if self.L <= 0:
                raise DomainError("L must be positive")
            ns = np.unique(np.concatenate([np.arange(1, 1025), np.logspace(3, 7, 60).round()]))
            for n in ns:
                vals = [self.tau(k, n) for k in range(1, self.depth + 1)]
                if any(b < a for a, b in zip(vals, vals[1:])):
                    raise DomainError(f"tau grid not ordered across levels at n={n}")
                if abs(vals[-1] - n) > 1e-9 * n:
                    raise DomainError("the deepest tau must be the identity")
        else:
            raise DomainError(f"unknown mode {self.mode!r}")

    @classmethod
    def lipschitz(cls, grid: Sequence[float], d: int) -> "RadiusSchedule":
        grid = tuple(float(v) for v in grid)
        return cls(Mode.LIPSCHITZ, len(grid), int(d), lipschitz_grid=grid)

    @classmethod
    def dimension(cls, dims: Sequence[int], L: float) -> "RadiusSchedule":
        dims = tuple(int(v) for v in dims)
        return cls(Mode.DIMENSION, len(dims), dims[0], L=float(L), dim_grid=dims)

    @classmethod
    def local_loss(cls, tau: str | TauGrid, depth: int, d: int, L: float) -> "RadiusSchedule":
        if not isinstance(tau, TauGrid):
            tau = TauGrid(tau, depth)
        return cls(Mode.LOSS, int(depth), int(d), L=float(L), tau=tau)

    def level_dim(self, k: int) -> int:
        return self.dim_grid[k - 1] if self.mode is Mode.DIMENSION else self.d

    def radius(self, k: int, t: float) -> float:
        return radius(self, k, t)

    def describe(self) -> dict:
        out = {"mode": self.mode.value, "depth": self.depth, "d": self.d}
        if self.mode is Mode.LIPSCHITZ:
            out["lipschitz"] = ",".join(repr(v) for v in self.lipschitz_grid)
        else:
            out["L"] = self.L
        if self.mode is Mode.DIMENSION:
            out["dims"] = ",".join(str(v) for v in self.dim_grid)
        if self.mode is Mode.LOSS:
            out["tau"] = self.tau.kind
        return out


def radius(schedule: RadiusSchedule, k: int, t: float) -> float:
    if not 1 <= k <= schedule.depth:
        raise DomainError(f"level {k} outside 1..{schedule.depth}")
    if t < 1:
        raise DomainError(f"round {t} must be >= 1")
    if schedule.mode is Mode.LIPSCHITZ:
        return (schedule.lipschitz_grid[k - 1] * t) ** (-1.0 / (schedule.d + 1))
    if schedule.mode is Mode.DIMENSION:
        return (schedule.L * t) ** (-1.0 / (1 + schedule.dim_grid[k - 1]))
    return (schedule.L * schedule.tau(k, t)) ** (-1.0 / (2 + schedule.d))


class Node:
    __slots__ = ("id", "level", "birth", "center", "parent", "learner", "children", "_cc")

    def __init__(self, level, birth, center, parent, learner):
        self.id = (level, birth)
        self.level = level
        self.birth = birth
        self.center = center
        self.parent = parent
        self.learner = learner
        self.children: list[tuple[int, int]] = []
        self._cc = np.empty((0, center.shape[0]))

    def add_child(self, child: "Node") -> None:
        n = len(self.children)
        if n == self._cc.shape[0]:
            grown = np.empty((max(4, 2 * n), self._cc.shape[1]))
            grown[:n] = self._cc
            self._cc = grown
        self._cc[n] = child.center
        self.children.append(child.id)

    @property
    def child_centers(self) -> np.ndarray:
        return self._cc[: len(self.children)]

    def __repr__(self):
        return f"Node(level={self.level}, birth={self.birth}, parent={self.parent})"


class Tree:
    """The hierarchical net: nodes keyed by ``(level, birth)``."""

    def __init__(self, depth: int, dim: int, kind: LossKind = LossKind.SQUARE):
        self.depth = depth
        self.dim = dim
        self.kind = LossKind.parse(kind)
        root = Node(0, 0, np.zeros(dim), None, None)
        self.nodes: dict[tuple[int, int], Node] = {ROOT: root}
        self.level_counts = [0] * (depth + 1)
        self.last_round = 0

    @property
    def root(self) -> Node:
        return self.nodes[ROOT]

    @property
    def size(self) -> int:
        """Number of nodes ever created, excluding the root (M_T)."""
        return len(self.nodes) - 1

    def __len__(self):
        return self.size

    def __getitem__(self, node_id) -> Node:
        return self.nodes[node_id]

    def children(self, node_id) -> list[tuple[int, int]]:
        return self.nodes[node_id].children

    def create(self, parent: Node, x: np.ndarray, t: int) -> Node:
        level = parent.level + 1
        node = Node(level, t, x, parent.id, new_learner(self.kind))
        self.nodes[node.id] = node
        parent.add_child(node)
        self.level_counts[level] += 1
        return node

    def level_nodes(self, k: int) -> list[Node]:
        return [n for n in self.nodes.values() if n.level == k]

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.level > 0 and not n.children]

    def path_to(self, node_id) -> list[tuple[int, int]]:
        """Ids from level 1 down to `node_id`."""
        out = []
        while node_id != ROOT:
            out.append(node_id)
            node_id = self.nodes[node_id].parent
        return out[::-1]

    def check_structure(self) -> None:
        total = 0
        for nid, node in self.nodes.items():
            if nid == ROOT:
                continue
            parent = self.nodes[node.parent]
            if parent.level != node.level - 1 or nid not in parent.children:
                raise AssertionError(f"inconsistent parent link at {nid}")
            total += 1
        if total != sum(self.level_counts):
            raise AssertionError("level counts do not add up to the node count")


@dataclass
class ActivePath:
    """The awake experts of one round, ordered from level 1 to level D."""

    nodes: tuple[tuple[int, int], ...]
    predictions: np.ndarray
    new: tuple[bool, ...]

    def __len__(self):
        return len(self.nodes)


def _closest(node: Node, x: np.ndarray, parent_radius: float | None):
    """Closest child of `node` to `x`, restricted to the parent ball.

    Falls back to all children when none lies inside the ball.  Ties go to the
    smallest birth index (children are stored in creation order).
    """
    cc = node.child_centers
    dist = np.sqrt(((cc - x) ** 2).sum(axis=1))
    if parent_radius is not None:
        inside = np.sqrt(((cc - node.center) ** 2).sum(axis=1)) <= parent_radius
        if inside.any():
            masked = np.where(inside, dist, np.inf)
            j = int(np.argmin(masked))
            return node.children[j], float(masked[j])
    j = int(np.argmin(dist))
    return node.children[j], float(dist[j])


def _descend(tree: Tree, x, t: int, schedule: RadiusSchedule, budget: float | None) -> ActivePath:
    if schedule.depth != tree.depth:
        raise DomainError("schedule depth does not match the tree")
    x = check_instance(x)
    if x.shape[0] != tree.dim:
        raise DomainError(f"instance has dimension {x.shape[0]}, tree expects {tree.dim}")
    if t <= tree.last_round:
        raise DomainError(f"round {t} is not after round {tree.last_round}")
    tree.last_round = t

    radii = [radius(schedule, k, t) for k in range(1, tree.depth + 1)]
    if budget is not None:
        # a new center at level k forces a fresh chain below it, so creation
        # at k needs room at every level from k down to D
        room = [
            tree.level_counts[k] <= budget * radii[k - 1] ** (-schedule.level_dim(k))
            for k in range(1, tree.depth + 1)
        ]
        for k in range(tree.depth - 1, 0, -1):
            room[k - 1] = room[k - 1] and room[k]

    parent = tree.root
    ids, preds, new = [], [], []
    for k in range(1, tree.depth + 1):
        eps = radii[k - 1]
        if not parent.children:
            node = tree.create(parent, x, t)
            created = True
        else:
            parent_radius = radii[k - 2] if k > 1 else None
            cid, dist = _closest(parent, x, parent_radius)
            can_create = budget is None or room[k - 1]
            if dist <= eps or not can_create:
                node = tree.nodes[cid]
                created = False
            else:
                node = tree.create(parent, x, t)
                created = True
        ids.append(node.id)
        preds.append(node.learner.predict())
        new.append(created)
        parent = node
    return ActivePath(tuple(ids), np.array(preds), tuple(new))


def propagate(tree: Tree, x, t: int, schedule: RadiusSchedule) -> ActivePath:
    """Route `x` down the net at round `t`, growing it where needed."""
    return _descend(tree, x, t, schedule, None)


def propagate_dim(tree: Tree, x, t: int, schedule: RadiusSchedule, C: float) -> ActivePath:
    """Like `propagate`, but level k only grows while ``|S_k| <= C eps**-d_k``."""
    if schedule.mode is not Mode.DIMENSION:
        raise DomainError("propagate_dim needs a dimension-mode schedule")
    if C <= 0:
        raise DomainError("covering constant must be positive")
    return _descend(tree, x, t, schedule, float(C))


@dataclass
class AuditReport:
    covering_failures: list = field(default_factory=list)  # (t, level)
    packing_failures: list = field(default_factory=list)  # node ids

    @property
    def covering_ok(self) -> bool:
        return not self.covering_failures

    @property
    def packing_ok(self) -> bool:
        return not self.packing_failures

    @property
    def passed(self) -> bool:
        return self.covering_ok and self.packing_ok

    def __bool__(self):
        return self.passed


def covering_audit(tree: Tree, log, schedule: RadiusSchedule, tol: float = 1e-12) -> AuditReport:
    """Re-check the cover and creation-time packing properties of a run.

    `log` must expose ``x`` (T x d), ``path_births`` (T x D) and
    ``new_nodes`` (T x D booleans).
    """
    report = AuditReport()
    T, D = log.path_births.shape
    for i in range(T):
        t = i + 1
        x = log.x[i]
        for k in range(1, D + 1):
            if log.new_nodes[i, k - 1]:
                continue
            center = tree.nodes[(k, int(log.path_births[i, k - 1]))].center
            if np.sqrt(((x - center) ** 2).sum()) > radius(schedule, k, t) + tol:
                report.covering_failures.append((t, k))

    for node in tree.nodes.values():
        if not node.children:
            continue
        k = node.level + 1
        cc = node.child_centers
        births = np.array([c[1] for c in node.children])
        if node.level > 0:
            to_parent = np.sqrt(((cc - node.center) ** 2).sum(axis=1))
        for j in range(1, len(births)):
            s = births[j]
            earlier = np.arange(j)
            if node.level > 0:
                earlier = earlier[to_parent[earlier] <= radius(schedule, node.level, s)]
            if earlier.size == 0:
                continue
            gaps = np.sqrt(((cc[earlier] - cc[j]) ** 2).sum(axis=1))
            if gaps.min() <= radius(schedule, k, s):
                report.packing_failures.append((k, int(s)))
    return report


def budget_violations(new_nodes, schedule: RadiusSchedule, C: float) -> list[tuple[int, int]]:
    """Rounds and levels where ``|S_k| > C radius(k, t)**-d_k + 1`` at round end.

    `new_nodes` is the T x D creation-flag matrix of a run.
    """
    counts = np.cumsum(np.asarray(new_nodes, dtype=np.int64), axis=0)
    T, D = counts.shape
    t = np.arange(1, T + 1, dtype=float)
    out = []
    for k in range(1, D + 1):
        cap = C * np.array([radius(schedule, k, s) for s in t]) ** (-schedule.level_dim(k)) + 1
        for i in np.flatnonzero(counts[:, k - 1] > cap * (1 + 1e-12)):
            out.append((int(i) + 1, k))
    return sorted(out)


def export_tree(tree: Tree) -> str:
    """One node per line: level, birth, parent birth, comma-joined center."""
    lines = []
    for nid in sorted(tree.nodes):
        if nid == ROOT:
            continue
        node = tree.nodes[nid]
        coords = ",".join(f"{v:.17g}" for v in node.center)
        lines.append(f"{node.level}\t{node.birth}\t{node.parent[1]}\t{coords}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_tree(text: str) -> list[tuple[int, int, int, tuple[float, ...]]]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        level, birth, parent, coords = line.split("\t")
        out.append((int(level), int(birth), int(parent), tuple(float(v) for v in coords.split(","))))
    return out


def build_tree(xs: Iterable, schedule: RadiusSchedule, kind: LossKind = LossKind.SQUARE,
               C: float | None = None) -> tuple[Tree, list[ActivePath]]:
    """Grow a net over a bare instance sequence (no learning)."""
    xs = [np.asarray(x, dtype=float).reshape(-1) for x in xs]
    tree = Tree(schedule.depth, xs[0].shape[0] if xs else schedule.d, kind)
    paths = []
    for t, x in enumerate(xs, start=1):
        if C is None:
            paths.append(propagate(tree, x, t, schedule))
        else:
            paths.append(propagate_dim(tree, x, t, schedule, C))
    return tree, paths

