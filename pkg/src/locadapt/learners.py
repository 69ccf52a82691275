"""Local online learners hosted at the nodes of the net.

Two learners are provided:

* `FtlState` -- Follow-the-Leader for the square loss, i.e. the running mean
  of the labels seen at the node.
* `WmState` -- self-confident Weighted Majority over the two constant experts
  predicting 0 and 1, used with the absolute loss.
"""

from __future__ import annotations

import math

from .core import LossKind, check_label

LN2 = math.log(2.0)


class FtlState:
    """Follow-the-Leader state: count, sum and sum of squares of labels."""

    __slots__ = ("n", "sum_y", "sum_y2")

    def __init__(self, n: int = 0, sum_y: float = 0.0, sum_y2: float = 0.0):
        self.n = n
        self.sum_y = sum_y
        self.sum_y2 = sum_y2

    def predict(self) -> float:
        return ftl_predict(self)

    def update(self, y: float) -> None:
        self.n += 1
        self.sum_y += y
        self.sum_y2 += y * y

    def copy(self) -> "FtlState":
        return FtlState(self.n, self.sum_y, self.sum_y2)

    def __repr__(self):
        return f"FtlState(n={self.n}, sum_y={self.sum_y!r})"


class WmState:
    """Cumulative absolute losses of the constant-0 and constant-1 experts."""

    __slots__ = ("loss0", "loss1", "n")

    def __init__(self, loss0: float = 0.0, loss1: float = 0.0, n: int = 0):
        self.loss0 = loss0
        self.loss1 = loss1
        self.n = n

    def predict(self) -> float:
        return wm_predict(self)

    def update(self, y: float) -> None:
        self.loss0 += abs(y)
        self.loss1 += abs(1.0 - y)
        self.n += 1

    def copy(self) -> "WmState":
        return WmState(self.loss0, self.loss1, self.n)

    def __repr__(self):
        return f"WmState(loss0={self.loss0!r}, loss1={self.loss1!r}, n={self.n})"


def ftl_predict(state: FtlState) -> float:
    if state.n == 0:
        return 0.5
    return min(1.0, max(0.0, state.sum_y / state.n))


def wm_learning_rate(state: WmState) -> float:
    best = min(state.loss0, state.loss1)
    return min(1.0, math.sqrt(LN2 / (1.0 + best)))


def wm_predict(state: WmState) -> float:
    """Weight on the constant-1 expert under the self-confident rate."""
    eta = wm_learning_rate(state)
    # softmax of the two experts, shifted for stability
    gap = eta * (state.loss1 - state.loss0)
    if gap >= 0:
        e = math.exp(-gap)
        return e / (1.0 + e)
    e = math.exp(gap)
    return 1.0 / (1.0 + e)


def new_learner(kind: LossKind):
    return FtlState() if kind is LossKind.SQUARE else WmState()


def update_local(state, y: float, kind: LossKind | None = None):
    """Feed one label to a local learner (in place); returns the state."""
    if kind is None:
        kind = LossKind.SQUARE if isinstance(state, FtlState) else LossKind.ABSOLUTE
    check_label(kind, y)
    state.update(float(y))
    return state


def local_best(state, kind: LossKind) -> tuple[float, float]:
    """Best constant in hindsight and its cumulative loss at this node.

    For the square loss the comparator ranges over [0, 1]; for the absolute
    loss over {0, 1}.
    """
    if kind is LossKind.SQUARE:
        if state.n == 0:
            return 0.5, 0.0
        y_star = min(1.0, max(0.0, state.sum_y / state.n))
        cum = 0.5 * (state.sum_y2 - 2.0 * y_star * state.sum_y + state.n * y_star * y_star)
        return y_star, max(cum, 0.0)
    if state.loss0 <= state.loss1:
        return 0.0, state.loss0
    return 1.0, state.loss1

# Additive constant c in  loss - best <= 2 sqrt(2 ln2 best) + c ln2  for the
# two-expert self-confident learner; measured by tools/measure_constants.py.
WM_REGRET_CONSTANT = 1.6
