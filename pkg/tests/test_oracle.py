import numpy as np
import pytest
from hypothesis import given, strategies as st

from persdel.agent import TieBreak
from persdel.domain import MonotoneSet, make_linear_primitive
from persdel.errors import TooManyCells
from persdel.oracle import (_primitive_tables, code_value, count_candidates, decode, enumerate_optimum,
                            equivalence_battery, random_linear_delegation, random_set, segments, snap_grid)
from persdel.poly import PiecewisePoly as P
from persdel.scenario import kg_scenario, to_primitive
from persdel.solver import classify_and_solve
from persdel.valuation import expected_payoffs, ms1991_nu, regulation_nu

W = P.identity()


def test_snap_grid_places_critical_points():
    g = snap_grid(0, 1, 10, [0.43, 0.5])
    assert 0.43 in g and 0.5 in g and len(g) == 11


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_counts_match_distinct_sets(n):
    nodes = np.linspace(0, 1, n + 1)
    raw = 1 << (n + max(n - 1, 0))
    distinct = {decode(c, nodes).intervals for c in range(raw)}
    assert len(distinct) == count_candidates(n)
    assert count_candidates(n, "cells") == 1 << n


def test_segment_code_example():
    # cells 0 and 3 separated, node 2 splits the pooled cells 1 and 2
    n = 4
    code = (0b1001 << (n - 1)) | (1 << 1)
    sep, gaps = segments(code, n)
    assert sep == [0, 3] and gaps == [(1, 2), (2, 3)]


def test_kg_grid_optimum():
    s = kg_scenario()
    r = enumerate_optimum(to_primitive(s, validate=False), 10, critical_points=s.critical_points)
    assert r.best.points() == pytest.approx([0.0, 0.4, 1.0])
    assert r.value == pytest.approx(0.6, abs=1e-9)


def test_too_many_cells():
    with pytest.raises(TooManyCells):
        enumerate_optimum((ms1991_nu(1.0), W), 17)


@given(st.integers(0, 2 ** 32 - 1))
def test_tables_match_direct_evaluation(seed):
    rng = np.random.default_rng(seed)
    p = random_linear_delegation(rng)
    nodes = snap_grid(*p.decision_domain, 6)
    tab = _primitive_tables(p, nodes, TieBreak.PRINCIPAL_PREFERRED)
    code, s = random_set(rng, nodes)
    v = expected_payoffs(p, s)
    assert code_value(tab, code, 6) == pytest.approx((v.principal, v.agent), abs=1e-12)


@given(st.sampled_from([0.5, 1.0, 3.0]), st.integers(2, 6))
def test_refinement_never_hurts(k, n):
    nu, c = ms1991_nu(k), P.identity(-2, 3)
    assert enumerate_optimum((nu, c), 2 * n).value >= enumerate_optimum((nu, c), n).value - 1e-12


@pytest.mark.parametrize("k", [1.0, 3.0])
def test_grid_optimum_bounded_by_analytic(k):
    nu, c = ms1991_nu(k), P.identity(-2, 3)
    sol = classify_and_solve(nu, c)
    assert enumerate_optimum((nu, c), 10).value <= sol.value + 1e-9


def test_battery_small():
    rep = equivalence_battery(make_linear_primitive(W, W, W + 0.1), trials=30, seed=3)
    assert rep.passed
    assert rep.max_gap_principal < 1e-12


def test_regulation_grid_near_optimum(tri):
    nu = regulation_nu(tri)
    r = enumerate_optimum((nu, W), 8)
    assert r.best.balanced and r.mode == "linear"
