import numpy as np
import pytest

from persdel.agent import decision_schedule
from persdel.domain import DELEGATION, MonotoneSet, SeparableField, make_linear_primitive, make_primitive
from persdel.errors import NotUnimodal, UnboundedV
from persdel.poly import PiecewisePoly as P
from persdel.scenario import DENSITIES
from persdel.solver import (bounding_interval, check_unimodal, classify_and_solve, detect_shape,
                            gain_loss_residual, regulation_price_fn, solve_upper_censorship, tangency_residual,
                            verify_optimal)
from persdel.valuation import build_nu, expected_nu, ms1991_nu, regulation_nu

W = P.identity()


def test_unimodal_mode(tri):
    assert check_unimodal(tri) == pytest.approx(0.5)
    assert check_unimodal(DENSITIES["quadratic-0.7"]()) == pytest.approx(0.7)
    with pytest.raises(NotUnimodal):
        check_unimodal(P.constant(1.0))


def test_triangular_cutoffs(tri):
    one, two = solve_upper_censorship(tri, 1.0), solve_upper_censorship(tri, 2.0)
    assert one.theta_star == pytest.approx(0.6288864005, abs=1e-9)
    assert two.theta_star == pytest.approx(0.5, abs=1e-10)
    for s in (one, two):
        assert abs(s.foc_residual) <= 1e-10 and abs(s.identity_residual) <= 1e-10
        assert s.bracket_source == "tight" and s.certificate.verified


def test_cutoff_beats_nearby_cutoffs(tri):
    sol = solve_upper_censorship(tri, 1.0)
    c = W
    for t in (sol.theta_star - 0.02, sol.theta_star + 0.02):
        v = expected_nu(MonotoneSet(((0.0, t), (1.0, 1.0))), sol.nu, c)
        assert v < sol.value


def test_residual_forms_agree_at_root(tri):
    nu = regulation_nu(tri)
    t = solve_upper_censorship(tri).theta_star
    assert abs(tangency_residual(nu, t, 1.0)) < 1e-12
    assert abs(gain_loss_residual(tri, t, 1.0)) < 1e-12
    assert tangency_residual(nu, 0.55, 1.0) * tangency_residual(nu, 0.74, 1.0) < 0


def test_price_function_branches():
    p = regulation_price_fn(0.6, 1.0)
    assert p(0.1) == pytest.approx(0.55)   # unconstrained monopoly price (1 + g)/2
    assert p(0.3) == pytest.approx(0.6)    # cap binds
    assert p(0.9) == pytest.approx(1.0)    # exit
    q = regulation_price_fn(0.5, 2.0)
    assert q(0.9) == pytest.approx(0.5)


def test_refutes_suboptimal_set(tri):
    nu = regulation_nu(tri)
    cert = verify_optimal(MonotoneSet.trivial(), nu, W)
    assert not cert.verified and cert.witness is not None


def test_ms1991_classification():
    c = P.identity(-2, 3)
    a = classify_and_solve(ms1991_nu(1.0), c)
    assert a.shape == "Convex" and len(a.pi.separated()) == 1 and a.certificate.verified
    b = classify_and_solve(ms1991_nu(3.0), c)
    assert b.shape == "Concave" and b.certificate.verified
    assert b.pi.points() == pytest.approx([-2.0, 1.5, 3.0])


def test_regulation_nu_is_s_shaped(tri):
    shape, infl = detect_shape(regulation_nu(tri))
    assert shape == "convex-concave"
    assert infl == pytest.approx(0.75, abs=1 / 512)


def test_bounding_interval_quadratic_bias():
    p = make_linear_primitive(W, P.identity(-5, 6), W + 0.1)
    bi = bounding_interval(p, 0.5)
    assert bi.Z == pytest.approx((-0.3, 1.7), abs=1e-9)
    assert bi.X == pytest.approx((-1.7, 2.3), abs=1e-9)
    assert bi.y_lo == pytest.approx(-4.26, abs=1e-9) and bi.y_hi == pytest.approx(4.86, abs=1e-9)


def test_bounding_interval_anchor_does_not_change_choices():
    p = make_linear_primitive(W, P.identity(-5, 6), W + 0.1)
    th = np.linspace(0, 1, 41)
    seen = []
    for z0 in (0.5, 0.2):
        bi = bounding_interval(p, z0)
        c = P.identity(bi.y_lo, bi.y_hi)
        q = make_linear_primitive(W, c, W + 0.1)
        sol = classify_and_solve(build_nu(q), c)
        assert sol.certificate.verified
        seen.append(decision_schedule(q, sol.pi, th))
    assert np.allclose(seen[0], seen[1], atol=1e-9)
    assert np.allclose(seen[0], np.maximum(th, 0.2), atol=1e-9)


def test_bounding_interval_needs_divergent_payoffs():
    one, dd = P.constant(1.0), P.constant(1.0, -5, 6)
    X = P.identity(-5, 6)
    q = make_primitive(SeparableField([(W, dd), (one, -X)]), SeparableField([(W + 0.1, dd)]), DELEGATION,
                       validate=False)
    with pytest.raises(UnboundedV):
        bounding_interval(q, 0.5)
