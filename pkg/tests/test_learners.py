import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locadapt.core import DomainError, LossKind
from locadapt.learners import (LN2, WM_REGRET_CONSTANT, FtlState, WmState, ftl_predict,
                               local_best, update_local, wm_learning_rate, wm_predict)


def feed(state, labels):
    for y in labels:
        update_local(state, y)
    return state


def grid_argmin(labels, n=10_001):
    grid = np.linspace(0.0, 1.0, n)
    y = np.asarray(labels)[:, None]
    return grid[np.argmin((0.5 * (y - grid) ** 2).sum(axis=0))]


def test_ftl_examples():
    assert ftl_predict(FtlState()) == 0.5
    assert ftl_predict(feed(FtlState(), [0.0, 1.0])) == 0.5
    labels = [1.0, 1.0, 1.0, 0.0]
    assert ftl_predict(feed(FtlState(), labels)) == 0.75
    assert grid_argmin(labels) == pytest.approx(0.75, abs=1e-4)


def test_update_local_examples():
    s = update_local(FtlState(), 1.0)
    assert (s.n, s.sum_y) == (1, 1.0)
    w = update_local(WmState(), 1.0)
    assert (w.loss0, w.loss1, w.n) == (1.0, 0.0, 1)
    with pytest.raises(DomainError):
        update_local(WmState(), 0.5)
    with pytest.raises(DomainError):
        update_local(FtlState(), 1.5)


def test_wm_examples():
    assert wm_predict(WmState(2.0, 2.0, 4)) == 0.5
    prev = 0.5
    for n in range(1, 30):
        p = wm_predict(WmState(0.0, float(n), n))
        assert p < prev
        prev = p
    # constant-1 expert losing drives the weight toward 0; mirror for the other side
    ups = [wm_predict(WmState(float(n), 0.0, n)) for n in range(1, 30)]
    assert all(0.5 < a < b <= 1.0 for a, b in zip(ups, ups[1:]))


def test_wm_independent_formula():
    eta = math.sqrt(math.log(2) / 2)
    expected = math.exp(-eta * 1) / (math.exp(-eta * 3) + math.exp(-eta * 1))
    assert wm_learning_rate(WmState(3.0, 1.0, 4)) == pytest.approx(eta, rel=1e-15)
    assert wm_predict(WmState(3.0, 1.0, 4)) == pytest.approx(expected, rel=1e-14)


def test_local_best_examples():
    assert local_best(feed(WmState(), [1.0, 1.0, 0.0]), LossKind.ABSOLUTE) == (1.0, 1.0)
    y, cum = local_best(feed(FtlState(), [0.0, 1.0]), LossKind.SQUARE)
    assert y == 0.5 and cum == pytest.approx(0.25)
    assert local_best(FtlState(), LossKind.SQUARE) == (0.5, 0.0)
    assert local_best(WmState(), LossKind.ABSOLUTE) == (0.0, 0.0)


@given(st.lists(st.sampled_from([0.0, 1.0]), max_size=60))
def test_wm_loss_sum_invariant(labels):
    s = feed(WmState(), labels)
    assert s.loss0 + s.loss1 == s.n == len(labels)


@settings(max_examples=60)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=200))
def test_ftl_regret_and_grid_oracle(labels):
    s = FtlState()
    total = 0.0
    for y in labels:
        total += 0.5 * (y - ftl_predict(s)) ** 2
        s.update(y)
    y_star, best = local_best(s, LossKind.SQUARE)
    assert total - best <= 8 * math.log(math.e * len(labels))
    assert abs(ftl_predict(s) - grid_argmin(labels)) <= 1e-4
    assert best == pytest.approx(sum(0.5 * (y - y_star) ** 2 for y in labels), abs=1e-9)


@settings(max_examples=60)
@given(st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=300))
def test_wm_first_order_bound(labels):
    s = WmState()
    total = 0.0
    for y in labels:
        total += abs(y - wm_predict(s))
        s.update(y)
    best = min(s.loss0, s.loss1)
    assert total - best <= 2 * math.sqrt(2 * LN2 * best) + WM_REGRET_CONSTANT * LN2


def test_copy_is_independent():
    a = feed(FtlState(), [0.2])
    b = a.copy()
    b.update(1.0)
    assert a.n == 1 and b.n == 2
