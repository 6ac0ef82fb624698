import numpy as np
import pytest

from persdel.agent import (TieBreak, best_decision_delegation, best_decision_persuasion, decision_schedule, pick,
                           posterior_mean)
from persdel.domain import PERSUASION, MonotoneSet, make_linear_primitive
from persdel.errors import WrongOrientation
from persdel.poly import PiecewisePoly as P

W = P.identity()


def test_pick_tie_rules():
    xs, a, v = [0.0, 0.5, 1.0], [1.0, 1.0, 0.2], [0.3, 0.9, 5.0]
    assert pick(xs, a, v, TieBreak.PRINCIPAL_PREFERRED) == 1
    assert pick(xs, a, v, TieBreak.PRINCIPAL_WORST) == 0
    assert pick(xs, a, v, TieBreak.LOWEST) == 0
    assert pick(xs, [0.0, 2.0, 1.0], v, TieBreak.LOWEST) == 1


def test_delegation_picks_nearest_permitted_ideal():
    p = make_linear_primitive(W, W, W + 0.1)
    s = MonotoneSet.parse([0.0, 0.5, 1.0])
    assert best_decision_delegation(p, s, 0.3) == 0.5
    assert best_decision_delegation(p, s, 0.9) == 1.0
    assert best_decision_delegation(p, MonotoneSet.full(), 0.37) == pytest.approx(0.37, abs=1e-12)


def test_delegation_tie_goes_to_principal():
    p = make_linear_primitive(W, W, W + 0.1)
    s = MonotoneSet.parse([0.0, 0.5, 1.0])
    assert best_decision_delegation(p, s, 0.25) == 0.5
    assert best_decision_delegation(p, s, 0.25, TieBreak.PRINCIPAL_WORST) == 0.0


def test_persuasion_decision_is_posterior_mean():
    p = make_linear_primitive(W, W, W, PERSUASION)
    s = MonotoneSet.parse([[0.0, 0.2], 0.6, 1.0])
    assert posterior_mean(s, 0.4, W) == pytest.approx(0.4)
    assert best_decision_persuasion(p, s, 0.4) == pytest.approx(0.4, abs=1e-12)
    assert best_decision_persuasion(p, s, 0.7) == pytest.approx(0.8, abs=1e-12)
    assert best_decision_persuasion(p, s, 0.1) == pytest.approx(0.1, abs=1e-12)


def test_schedule_is_monotone():
    p = make_linear_primitive(W, W, W + 0.1)
    s = MonotoneSet.parse([[0.0, 0.2], 0.5, [0.7, 1.0]])
    x = decision_schedule(p, s, np.linspace(0, 1, 101))
    assert np.all(np.diff(x) >= -1e-12)


def test_orientation_guard():
    p = make_linear_primitive(W, W, W)
    with pytest.raises(WrongOrientation):
        best_decision_persuasion(p, MonotoneSet.full(), 0.5)
