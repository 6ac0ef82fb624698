import numpy as np
import pytest
from hypothesis import given, strategies as st

from persdel.domain import (DELEGATION, PERSUASION, GridField, MonotoneSet, QuantileDistribution,
                            SeparableField, check_monotone_field, make_linear_primitive, make_primitive)
from persdel.errors import DomainMismatch, NonMonotone, OutOfDomain
from persdel.poly import PiecewisePoly as P

W = P.identity()


def test_set_merges_and_pools():
    s = MonotoneSet.parse([[0, 0.3], [0.25, 0.4], 0.6, 1.0])
    assert s.intervals == ((0.0, 0.4), (0.6, 0.6), (1.0, 1.0))
    assert s.pools() == [(0.4, 0.6), (0.6, 1.0)]
    assert s.balanced
    assert s.element(0.5) == ("pool", 0.4, 0.6)
    assert s.element(0.2) == ("point", 0.2)
    assert s.element(1.0) == ("point", 1.0)


def test_set_rejects_outside_and_empty():
    with pytest.raises(OutOfDomain):
        MonotoneSet.parse([1.5])
    with pytest.raises(ValueError):
        MonotoneSet(())


def test_unbalanced_flag():
    assert not MonotoneSet.parse([0.0, 0.5]).balanced


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8))
def test_set_invariants(points):
    s = MonotoneSet.from_points(points)
    ivs = s.intervals
    assert all(a <= b for a, b in ivs)
    assert all(ivs[k][1] < ivs[k + 1][0] for k in range(len(ivs) - 1))
    for p in points:
        assert s.contains(p)


def test_uniform_distribution(tri):
    U = QuantileDistribution.uniform(2.0, 4.0)
    assert U.is_uniform
    assert U.ppf(0.25) == pytest.approx(2.5)
    assert U.mean() == pytest.approx(3.0)


def test_density_distribution_mode_and_mean(tri):
    F = QuantileDistribution.from_density(tri)
    assert F.mode() == pytest.approx(0.5)
    assert F.mean() == pytest.approx(0.5, abs=1e-12)
    assert F.cdf(0.5) == pytest.approx(0.5, abs=1e-12)


def test_discrete_atoms_are_quantile_flats():
    F = QuantileDistribution.discrete([0.0, 1.0], [0.7, 0.3])
    assert F.ppf(0.5) == pytest.approx(0.0)
    assert F.ppf(0.8) == pytest.approx(1.0)
    atoms = dict((round(a, 12), m) for a, m in F.atoms())
    assert atoms[0.0] == pytest.approx(0.7)
    assert atoms[1.0] == pytest.approx(0.3)


@given(st.floats(0.01, 0.99))
def test_cdf_inverts_ppf(u):
    F = QuantileDistribution.from_density(P([0.0, 0.5, 1.0], [[0.0, 4.0], [2.0, -4.0]]))
    assert F.cdf(F.ppf(u)) == pytest.approx(u, abs=1e-9)


def test_linear_primitive_orientations():
    d = make_linear_primitive(W, W, W + 0.1)
    assert d.orientation == DELEGATION and d.kind == "linear" and d.anchor == 1.0
    assert d.agent.eval(0.7, 0.2) == pytest.approx(0.5)
    assert d.principal.eval(0.7, 0.2) == pytest.approx(0.6)
    p = make_linear_primitive(W, W, W, PERSUASION)
    assert p.anchor == 0.0
    assert p.agent.eval(0.7, 0.2) == pytest.approx(0.5)


def test_linear_primitive_needs_increasing_b():
    with pytest.raises(NonMonotone):
        make_linear_primitive(-W, W, W)


def test_domain_mismatch():
    with pytest.raises(DomainMismatch):
        make_linear_primitive(W, W, P.identity(0, 2))


def test_levels_are_anchored():
    p = make_linear_primitive(W, W, W)
    assert p.agent_level(0.3, 1.0) == 0.0
    # integral from 1 down to 0.3 of (0.3 - s) ds
    assert p.agent_level(0.3, 0.3) == pytest.approx(0.245)


def test_grid_field_matches_separable_for_bilinear():
    one = P.constant(1.0)
    sf = SeparableField([(W * 2.0, one), (one, -W * 2.0)])
    gf = GridField.from_function(sf.eval, n=33)
    t = np.linspace(0, 1, 11)
    T, X = np.meshgrid(t, t)
    assert np.allclose(gf.eval(T, X), sf.eval(T, X), atol=1e-14)
    assert np.allclose(gf.level(T, X, 0.0), sf.level(T, X, 0.0), atol=1e-14)


def test_monotone_field_check_warns():
    one = P.constant(1.0)
    bad = SeparableField([(-W, one)])
    assert check_monotone_field(bad)
    with pytest.warns(UserWarning):
        make_primitive(bad, bad, DELEGATION)
