"""Sleeping-experts aggregation over the awake root-to-leaf path.

`EwaState` runs exponential weights with ``eta = 1/2`` (square loss is
1/2-exp-concave on [0, 1]); the update only touches awake experts and keeps
their total mass fixed.  `AnhState` is the parameter-free AdaNormalHedge
variant used with the absolute loss.

Weights are kept in the log domain: with long runs the ratio between two
co-awake experts can exceed the float range.
"""

from __future__ import annotations

import math

import numpy as np

from .core import LossKind, loss_vec

EWA_ETA = 0.5


class EwaState:
    """Exponential weights over sleeping experts.

    ``init_weight`` is the weight a node enters with (1 by default); runs
    started from any other constant predict identically.
    """

    eta = EWA_ETA

    def __init__(self, init_weight: float = 1.0):
        if init_weight <= 0:
            raise ValueError("initial weight must be positive")
        self.init_weight = float(init_weight)
        self._log_init = math.log(init_weight)
        self.logw: dict = {}

    def register(self, node_id) -> None:
        if node_id not in self.logw:
            self.logw[node_id] = self._log_init

    def weight(self, node_id) -> float:
        return math.exp(self.logw[node_id])

    def path_log_weights(self, nodes) -> np.ndarray:
        try:
            return np.array([self.logw[v] for v in nodes])
        except KeyError as err:
            raise KeyError(f"node {err.args[0]} not registered with the aggregator") from None

    def normalized(self, nodes) -> np.ndarray:
        lw = self.path_log_weights(nodes)
        p = np.exp(lw - lw.max())
        return p / p.sum()

    def predict(self, path) -> float:
        return ewa_predict(self, path)

    def update(self, path, losses) -> None:
        ewa_update(self, path, losses)


def _nodes(path):
    return path.nodes if hasattr(path, "nodes") else tuple(path)


def ewa_predict(state: EwaState, path, predictions=None) -> float:
    """Weighted mean of the awake predictions."""
    nodes = _nodes(path)
    if not nodes:
        raise ValueError("empty path")
    if predictions is None:
        predictions = path.predictions
    p = state.normalized(nodes)
    yhat = float(np.dot(p, predictions))
    lo, hi = float(np.min(predictions)), float(np.max(predictions))
    return min(hi, max(lo, yhat))


def ewa_update(state: EwaState, path, losses) -> None:
    """``w_v <- w_v exp(-eta l_v) / Z`` on the path, preserving awake mass."""
    nodes = _nodes(path)
    lw = state.path_log_weights(nodes)
    shifted = lw - state.eta * np.asarray(losses, dtype=float)
    # log of old mass minus log of new mass
    m_old, m_new = lw.max(), shifted.max()
    log_z = (m_new + math.log(np.exp(shifted - m_new).sum())) - (m_old + math.log(np.exp(lw - m_old).sum()))
    for v, val in zip(nodes, shifted - log_z):
        state.logw[v] = float(val)


def psi(r: float, c: float) -> float:
    """AdaNormalHedge potential weight.

    ``(exp([r+1]_+^2 / (3(c+1))) - exp([r-1]_+^2 / (3(c+1)))) / 2``
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    a = max(r + 1.0, 0.0) ** 2 / (3.0 * (c + 1.0))
    b = max(r - 1.0, 0.0) ** 2 / (3.0 * (c + 1.0))
    return 0.5 * (math.exp(a) - math.exp(b))


def log_psi(r: float, c: float) -> float:
    """``log(psi(r, c))``, finite wherever psi is positive; ``-inf`` when ``r <= -1``."""
    a = max(r + 1.0, 0.0) ** 2 / (3.0 * (c + 1.0))
    b = max(r - 1.0, 0.0) ** 2 / (3.0 * (c + 1.0))
    if a <= b:
        return -math.inf
    return a + math.log1p(-math.exp(b - a)) - math.log(2.0)


class AnhState:
    """Per-node cumulative regret ``rbar`` and absolute regret ``cum``."""

    def __init__(self):
        self.rbar: dict = {}
        self.cum: dict = {}

    def register(self, node_id) -> None:
        if node_id not in self.rbar:
            self.rbar[node_id] = 0.0
            self.cum[node_id] = 0.0

    def weights(self, nodes) -> np.ndarray:
        """Normalized weights of the path; uniform if every psi is zero."""
        lw = np.array([log_psi(self.rbar[v], self.cum[v]) for v in nodes])
        top = lw.max()
        if not np.isfinite(top):
            return np.full(len(nodes), 1.0 / len(nodes))
        p = np.exp(lw - top)
        return p / p.sum()

    def predict(self, path) -> float:
        p = self.weights(_nodes(path))
        return float(np.dot(p, path.predictions))

    def round(self, path, label: float, kind: LossKind = LossKind.ABSOLUTE) -> float:
        return anh_round(self, path, label, kind)


def anh_round(state: AnhState, path, label: float, kind: LossKind = LossKind.ABSOLUTE,
              predictions=None) -> float:
    """Predict with AdaNormalHedge on the path, then update with `label`.

    Returns the played prediction.  The mixture loss is normalized by the
    same weights used for prediction.
    """
    nodes = _nodes(path)
    if predictions is None:
        predictions = path.predictions
    predictions = np.asarray(predictions, dtype=float)
    for v in nodes:
        state.register(v)
    p = state.weights(nodes)
    yhat = float(np.dot(p, predictions))
    yhat = min(float(predictions.max()), max(float(predictions.min()), yhat))
    node_losses = loss_vec(kind, predictions, label)
    mix_loss = float(np.dot(p, node_losses))
    for v, r in zip(nodes, mix_loss - node_losses):
        state.rbar[v] += float(r)
        state.cum[v] += abs(float(r))
    return yhat


def tree_regret(log, pruning) -> float:
    """Aggregated loss minus the loss of the pruning leaf on each round's path."""
    leaf_cols = pruning_columns(log, pruning)
    rows = np.arange(log.T)
    return float(log.loss.sum() - log.node_loss[rows, leaf_cols].sum())


def pruning_columns(log, pruning) -> np.ndarray:
    """For every round, the path position (level - 1) of the pruning leaf.

    Raises ValueError unless each path contains exactly one leaf.
    """
    leaves = pruning.leaves if hasattr(pruning, "leaves") else frozenset(pruning)
    D = log.path_births.shape[1]
    hits = np.zeros(log.path_births.shape, dtype=bool)
    for level, birth in leaves:
        if not 1 <= level <= D:
            raise ValueError(f"leaf {(level, birth)} outside levels 1..{D}")
        hits[:, level - 1] |= log.path_births[:, level - 1] == birth
    counts = hits.sum(axis=1)
    bad = np.flatnonzero(counts != 1)
    if bad.size:
        raise ValueError(f"pruning does not cut round {int(bad[0]) + 1} exactly once")
    return hits.argmax(axis=1)

# Envelope constant for AdaNormalHedge tree regret,
#   regret(E) <= c (sqrt(|E| Lambda_E ln(M_T/|E|) + |E|) + ln(1 + T)),
# measured by tools/measure_constants.py.
ANH_REGRET_CONSTANT = 0.3
