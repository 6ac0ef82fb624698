import numpy as np
import pytest
from hypothesis import given, strategies as st

from persdel.domain import DELEGATION, PERSUASION, MonotoneSet, QuantileDistribution, make_linear_primitive
from persdel.equivalence import (delegation_to_persuasion, duality_residual, persuasion_to_delegation,
                                 quantile_reparameterize, transform, value_scale)
from persdel.errors import WrongOrientation
from persdel.oracle import random_linear_delegation, random_set, snap_grid
from persdel.poly import PiecewisePoly as P
from persdel.valuation import expected_payoffs

W = P.identity()


def test_transform_flips_marginals():
    pd = make_linear_primitive(W, P.identity(-1, 2), W + 0.1)
    pp = delegation_to_persuasion(pd)
    assert pp.orientation == PERSUASION
    assert pp.state_domain == (-1.0, 2.0) and pp.decision_domain == (0.0, 1.0)
    r = duality_residual(pd, pp)
    assert r.max_abs_U == 0.0 and r.max_abs_V == 0.0
    assert value_scale(pd) == pytest.approx(1 / 3)


def test_round_trip_is_identity():
    pd = random_linear_delegation(np.random.default_rng(7))
    back = persuasion_to_delegation(delegation_to_persuasion(pd))
    t = np.linspace(*pd.state_domain, 9)
    x = np.linspace(*pd.decision_domain, 9)
    T, X = np.meshgrid(t, x)
    assert np.allclose(back.agent.eval(T, X), pd.agent.eval(T, X), atol=1e-14)
    assert np.allclose(back.principal.eval(T, X), pd.principal.eval(T, X), atol=1e-14)


def test_wrong_orientation():
    with pytest.raises(WrongOrientation):
        persuasion_to_delegation(make_linear_primitive(W, W, W))


def test_quantile_reparameterize_makes_state_uniform(tri):
    F = QuantileDistribution.from_density(tri)
    p = make_linear_primitive(W, W, W, PERSUASION, F)
    u = quantile_reparameterize(p)
    assert u.state_dist.is_uniform
    assert u.agent.eval(0.5, 0.2) == pytest.approx(p.agent.eval(0.5, 0.2), abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_values_agree_across_problems(seed):
    rng = np.random.default_rng(seed)
    pd = random_linear_delegation(rng)
    pp = transform(pd)
    nodes = snap_grid(*pd.decision_domain, 8)
    _, s = random_set(rng, nodes)
    vd, vp = expected_payoffs(pd, s), expected_payoffs(pp, s)
    k = value_scale(pd)
    assert vd.principal * k == pytest.approx(vp.principal, abs=1e-7)
    assert vd.agent * k == pytest.approx(vp.agent, abs=1e-7)
    assert pd.orientation == DELEGATION
