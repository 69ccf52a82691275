"""Synthetic environments, the locally adaptive runner and regret ledgers."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .aggregate import AnhState, EwaState, anh_round, ewa_predict, ewa_update
from .core import DomainError, Example, LossKind, check_label, loss_vec
from .learners import local_best
from .net import Mode, RadiusSchedule, Tree, propagate, propagate_dim

RNG_ALGORITHM = "numpy.random.PCG64"

# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetFunction:
    """Continuous piecewise-linear profile of the first coordinate.

    ``f(x) = g(clip(x[0], 0, 1))`` where ``g`` interpolates ``values`` at
    ``breakpoints`` (``0 = b_0 < ... < b_m = 1``).  The Lipschitz constant in
    the Euclidean metric is the largest absolute slope.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        b = np.asarray(self.breakpoints)
        v = np.asarray(self.values)
        if b.shape != v.shape or b.size < 2:
            raise DomainError("breakpoints and values must match and have >= 2 entries")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise DomainError("breakpoints must increase from 0 to 1")
        if v.min() < 0.0 or v.max() > 1.0:
            raise DomainError("target values must lie in [0, 1]")

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def lipschitz(self) -> float:
        return float(np.abs(self.slopes).max())

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        s = np.clip(x[..., 0], 0.0, 1.0)
        out = np.interp(s, self.breakpoints, self.values)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def constant(cls, value: float = 0.5) -> "TargetFunction":
        return cls((0.0, 1.0), (value, value), "constant")

    @classmethod
    def zigzag(cls, segments, lo: float = 0.1, hi: float = 0.9, start: float = 0.5,
               name: str = "zigzag") -> "TargetFunction":
        """Bounce between `lo` and `hi` with slope magnitude per segment.

        `segments` is a list of ``(right_end, slope)`` covering [0, 1] in order.
        """
        xs, ys = [0.0], [start]
        x, y, direction = 0.0, start, 1.0
        for right, slope in segments:
            while x < right - 1e-15:
                target = hi if direction > 0 else lo
                run = abs(target - y) / slope
                if run <= 1e-15:
                    direction = -direction
                    continue
                if x + run < right - 1e-15:
                    x, y = x + run, target
                    direction = -direction
                else:
                    y = y + direction * slope * (right - x)
                    x = right
                xs.append(x)
                ys.append(min(hi, max(lo, y)))
        xs[-1] = 1.0
        return cls(tuple(xs), tuple(ys), name)

    @classmethod
    def mostly_flat(cls, low: float, high: float, steep_width: float = 0.1) -> "TargetFunction":
        return cls.zigzag([(steep_width, high), (1.0, low)], name="mostly-flat")

    @classmethod
    def uniformly_rough(cls, high: float) -> "TargetFunction":
        return cls.zigzag([(1.0, high)], name="uniformly-rough")

    @classmethod
    def preset(cls, name: str, low: float = 1.0, high: float = 1.0) -> "TargetFunction":
        if name == "mostly-flat":
            return cls.mostly_flat(low, high)
        if name == "uniformly-rough":
            return cls.uniformly_rough(high)
        if name == "constant":
            return cls.constant()
        raise DomainError(f"unknown target preset {name!r}")


# ---------------------------------------------------------------------------
# streams


@dataclass(frozen=True)
class StreamSpec:
    T: int
    d: int = 1
    seed: int = 0
    law: str = "uniform"  # "uniform" or "manifold:m"
    noise: float = 0.0
    classification: bool = False

    @property
    def manifold_dim(self) -> int | None:
        if self.law == "uniform":
            return None
        kind, _, m = self.law.partition(":")
        if kind != "manifold" or not m.isdigit():
            raise DomainError(f"unknown instance law {self.law!r}")
        return int(m)

    def validate(self) -> "StreamSpec":
        if self.T < 1 or self.d < 1:
            raise DomainError("T and d must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise DomainError("noise amplitude must be in [0, 1]")
        m = self.manifold_dim
        if m is not None and not 1 <= m < self.d:
            raise DomainError(f"manifold dimension {m} must satisfy 1 <= m < d={self.d}")
        return self


@dataclass
class Stream:
    x: np.ndarray
    y: np.ndarray
    f: np.ndarray  # clean target values
    spec: StreamSpec

    def __len__(self):
        return self.x.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield Example(self.x[i], float(self.y[i]), i + 1)


def _manifold_scale(m: int, d: int) -> float:
    sq = 0.25 * m + 0.0625 * (d - m)
    return min(1.0, 1.0 / math.sqrt(sq))


def manifold_embed(u: np.ndarray, d: int) -> np.ndarray:
    """Smooth embedding of ``[0, 1]^m`` into the unit ball of ``R^d``."""
    u = np.atleast_2d(u)
    m = u.shape[1]
    s = _manifold_scale(m, d)
    x = np.empty((u.shape[0], d))
    x[:, :m] = 0.5 * s * u
    for j in range(d - m):
        x[:, m + j] = 0.25 * s * np.sin(2.0 * np.pi * (u[:, j % m] + j / (d - m)))
    return x


def manifold_residual(x: np.ndarray, m: int) -> np.ndarray:
    """Distance from each row of `x` to the embedded manifold (via its chart)."""
    x = np.atleast_2d(x)
    d = x.shape[1]
    u = x[:, :m] / (0.5 * _manifold_scale(m, d))
    return np.linalg.norm(x - manifold_embed(u, d), axis=1)


def gen_stream(spec: StreamSpec, f: TargetFunction) -> Stream:
    """Draw a reproducible stream; identical (spec, seed) give identical bytes."""
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    m = spec.manifold_dim
    if m is None:
        x = rng.random((spec.T, spec.d)) / math.sqrt(spec.d)
    else:
        x = manifold_embed(rng.random((spec.T, m)), spec.d)
    clean = np.asarray(f(x), dtype=float).reshape(spec.T)
    noise = rng.uniform(-spec.noise, spec.noise, spec.T) if spec.noise > 0 else np.zeros(spec.T)
    if spec.classification:
        y = (clean + noise > 0.5).astype(float)
    else:
        y = np.clip(clean + noise, 0.0, 1.0)
    return Stream(x, y, clean, spec)


# ---------------------------------------------------------------------------
# runs


@dataclass
class LAConfig:
    schedule: RadiusSchedule
    loss: LossKind = LossKind.SQUARE
    C: float | None = None
    init_weight: float = 1.0

    def __post_init__(self):
        self.loss = LossKind.parse(self.loss)
        mode = self.schedule.mode
        if mode in (Mode.LIPSCHITZ, Mode.DIMENSION) and self.loss is not LossKind.SQUARE:
            raise DomainError(f"{mode.value} mode runs with the square loss")
        if mode is Mode.LOSS and self.loss is not LossKind.ABSOLUTE:
            raise DomainError("loss mode runs with the absolute loss")
        if mode is Mode.DIMENSION:
            if self.C is None:
                self.C = 1.0
            if self.C <= 0:
                raise DomainError("covering constant must be positive")

    @property
    def mode(self) -> Mode:
        return self.schedule.mode

    @property
    def depth(self) -> int:
        return self.schedule.depth


@dataclass
class RoundLog:
    """Per-round trace of a run plus its final tree."""

    x: np.ndarray
    y: np.ndarray
    f_clean: np.ndarray
    yhat: np.ndarray
    loss: np.ndarray
    path_births: np.ndarray  # T x D, node at level k is (k, path_births[t, k-1])
    node_pred: np.ndarray
    node_loss: np.ndarray
    new_nodes: np.ndarray
    top_level: np.ndarray
    tree: Tree
    config: LAConfig
    header: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def depth(self) -> int:
        return self.path_births.shape[1]

    @property
    def M_T(self) -> int:
        return self.tree.size

    @property
    def kind(self) -> LossKind:
        return self.config.loss

    @property
    def cum_loss(self) -> np.ndarray:
        return np.cumsum(self.loss)

    def path(self, i: int) -> tuple[tuple[int, int], ...]:
        """Node ids of the path at row `i` (round ``i + 1``)."""
        return tuple((k + 1, int(b)) for k, b in enumerate(self.path_births[i]))

    def node_rounds(self) -> dict:
        """Map node id -> array of row indices where it was awake."""
        out: dict = {}
        for k in range(self.depth):
            col = self.path_births[:, k]
            order = np.argsort(col, kind="stable")
            births, starts = np.unique(col[order], return_index=True)
            for b, rows in zip(births, np.split(order, starts[1:])):
                out[(k + 1, int(b))] = rows
        return out


def run_la(stream: Stream, config: LAConfig) -> RoundLog:
    """Run the locally adaptive learner over `stream`."""
    schedule = config.schedule
    kind = config.loss
    T = len(stream)
    D = schedule.depth
    tree = Tree(D, stream.x.shape[1], kind)
    use_dim = config.mode is Mode.DIMENSION
    square = kind is LossKind.SQUARE
    agg = EwaState(config.init_weight) if square else AnhState()

    yhat = np.empty(T)
    losses = np.empty(T)
    births = np.empty((T, D), dtype=np.int64)
    node_pred = np.empty((T, D))
    node_loss = np.empty((T, D))
    new_nodes = np.zeros((T, D), dtype=bool)
    top = np.empty(T, dtype=np.int64)

    for i in range(T):
        t = i + 1
        x, y = stream.x[i], check_label(kind, stream.y[i])
        if use_dim:
            path = propagate_dim(tree, x, t, schedule, config.C)
        else:
            path = propagate(tree, x, t, schedule)
        for v in path.nodes:
            agg.register(v)
        preds = path.predictions
        nl = loss_vec(kind, preds, y)
        if square:
            p = agg.normalized(path.nodes)
            pred = ewa_predict(agg, path)
            ewa_update(agg, path, nl)
        else:
            p = agg.weights(path.nodes)
            pred = anh_round(agg, path, y, kind)
        for v in path.nodes:
            tree.nodes[v].learner.update(y)

        yhat[i] = pred
        losses[i] = float(loss_vec(kind, pred, y))
        births[i] = [v[1] for v in path.nodes]
        node_pred[i] = preds
        node_loss[i] = nl
        new_nodes[i] = path.new
        top[i] = int(np.argmax(p)) + 1

    header = {"rng": RNG_ALGORITHM, "seed": stream.spec.seed, **schedule.describe(),
              "loss": kind.value}
    if use_dim:
        header["cover_constant"] = config.C
    return RoundLog(stream.x, stream.y, stream.f, yhat, losses, births, node_pred, node_loss,
                    new_nodes, top, tree, config, header)


def run_hm(stream: Stream, L: float, d: int, loss: LossKind = LossKind.SQUARE) -> RoundLog:
    """Flat net baseline: a one-level run with radius ``(L t)^(-1/(d+1))``."""
    loss = LossKind.parse(loss)
    if loss is LossKind.SQUARE:
        schedule = RadiusSchedule.lipschitz([L], d)
    else:
        schedule = RadiusSchedule.local_loss("linear", 1, d, L)
    return run_la(stream, LAConfig(schedule, loss))


# ---------------------------------------------------------------------------
# regret ledgers


def hindsight_predictions(log: RoundLog, pruning) -> np.ndarray:
    """Per round, the best constant in hindsight of the pruning leaf on the path."""
    from .aggregate import pruning_columns

    cols = pruning_columns(log, pruning)
    out = np.empty(log.T)
    best = {}
    for i, k in enumerate(cols):
        nid = (int(k) + 1, int(log.path_births[i, k]))
        if nid not in best:
            best[nid] = local_best(log.tree.nodes[nid].learner, log.kind)[0]
        out[i] = best[nid]
    return out


def regret_curve(log: RoundLog, comparator) -> np.ndarray:
    """Cumulative regret against a target function, a pruning, or raw predictions."""
    if isinstance(comparator, TargetFunction):
        comp = np.asarray(comparator(log.x), dtype=float).reshape(log.T)
    elif hasattr(comparator, "leaves"):
        comp = hindsight_predictions(log, comparator)
    else:
        comp = np.asarray(comparator, dtype=float).reshape(log.T)
    return np.cumsum(log.loss - loss_vec(log.kind, comp, log.y))


def regret_vs_clean(log: RoundLog) -> np.ndarray:
    """Cumulative regret against the clean target values logged with the stream."""
    return np.cumsum(log.loss - loss_vec(log.kind, log.f_clean, log.y))


def rounds_csv(log: RoundLog) -> str:
    buf = io.StringIO()
    buf.write("t,y,yhat,loss,cum_loss,leaf_level,new_nodes,path\n")
    cum = 0.0
    for i in range(log.T):
        cum += log.loss[i]
        path = "/".join(f"{k + 1}:{b}" for k, b in enumerate(log.path_births[i]))
        buf.write(f"{i + 1},{log.y[i]:.17g},{log.yhat[i]:.17g},{log.loss[i]:.17g},{cum:.17g},"
                  f"{log.top_level[i]},{int(log.new_nodes[i].sum())},{path}\n")
    return buf.getvalue()
