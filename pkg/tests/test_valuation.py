import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from persdel.agent import TieBreak, decision_schedule
from persdel.domain import PERSUASION, MonotoneSet, make_linear_primitive
from persdel.errors import UnbalancedSet
from persdel.poly import PiecewisePoly as P
from persdel.valuation import build_nu, expected_nu, expected_payoffs, ms1991_nu, regulation_nu

W = P.identity()
DELTA = 0.1


@pytest.fixture
def biased():
    return make_linear_primitive(W, W, W + DELTA)


def test_full_delegation_closed_form(biased):
    v = expected_payoffs(biased, MonotoneSet.full())
    assert v.principal == pytest.approx(1 / 6 - DELTA / 2, abs=1e-14)
    assert v.agent == pytest.approx(1 / 6, abs=1e-14)


def test_extremes_only_closed_form(biased):
    # types below 1/2 take 0 and the principal loses the bias on them
    v = expected_payoffs(biased, MonotoneSet.trivial())
    assert v.principal == pytest.approx(0.125 - DELTA / 2, abs=1e-14)
    assert v.agent == pytest.approx(0.125, abs=1e-14)


def test_matches_direct_quadrature(biased):
    s = MonotoneSet.parse([[0.0, 0.3], 0.5, [0.6, 0.7], 1.0])
    v = expected_payoffs(biased, s)

    def integrand(t):
        x = decision_schedule(biased, s, [t])[0]
        return biased.principal_level(t, x)

    ref = sum(quad(integrand, a, b, epsabs=1e-13)[0] for a, b in zip(np.r_[0, 0.15, 0.4, 0.55, 0.85], np.r_[
        0.15, 0.4, 0.55, 0.85, 1.0]))
    assert v.principal == pytest.approx(ref, abs=1e-9)


def test_nu_identity_for_linear(biased):
    nu = build_nu(biased)
    for s in (MonotoneSet.full(), MonotoneSet.trivial(), MonotoneSet.parse([[0.0, 0.3], 0.5, 1.0])):
        assert expected_nu(s, nu, W) == pytest.approx(expected_payoffs(biased, s).principal, abs=1e-12)


def test_unbalanced_rejected(biased):
    with pytest.raises(UnbalancedSet):
        expected_payoffs(biased, MonotoneSet.parse([0.0, 0.5]))


def test_tie_break_changes_value(biased):
    s = MonotoneSet.trivial()
    hi = expected_payoffs(biased, s, TieBreak.PRINCIPAL_PREFERRED).principal
    lo = expected_payoffs(biased, s, TieBreak.PRINCIPAL_WORST).principal
    assert hi >= lo - 1e-15


def test_ms1991_nu_matches_linear_build():
    for k in (0.5, 1.0, 3.0):
        a = build_nu(make_linear_primitive(W, P.identity(-2, 3), W * k))
        b = ms1991_nu(k)
        m = np.linspace(-2, 3, 41)
        assert np.allclose(a(m), b(m), atol=1e-13)


def test_regulation_nu_shape(tri):
    nu = regulation_nu(tri)
    assert nu(0.3) == 0.0
    assert nu(0.5) == pytest.approx(0.0, abs=1e-15)
    assert nu(1.0) == pytest.approx(0.5, abs=1e-12)  # m - E[g]
    assert nu(0.75) == pytest.approx(quad(lambda g: (0.75 - g) * tri(g), 0, 0.5)[0], abs=1e-12)


@given(st.floats(0.05, 0.95))
def test_persuasion_full_disclosure_is_first_best(t):
    # principal and agent share preferences: revealing everything is weakly best
    p = make_linear_primitive(W, W, W, PERSUASION)
    full = expected_payoffs(p, MonotoneSet.full()).principal
    cut = expected_payoffs(p, MonotoneSet.parse([[0.0, t], 1.0])).principal
    assert full >= cut - 1e-12
