"""Agent best responses in both problems."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .domain import DELEGATION, PERSUASION, Field, MonotoneSet, Primitive
from .errors import WrongOrientation
from .poly import PiecewisePoly

TIE_TOL = 1e-12


class TieBreak(str, Enum):
    PRINCIPAL_PREFERRED = "principal_preferred"
    PRINCIPAL_WORST = "principal_worst"
    LOWEST = "lowest"


def partition_element(pi: MonotoneSet, theta: float):
    return pi.element(theta)


def posterior_mean(pi: MonotoneSet, theta: float, c: PiecewisePoly) -> float:
    el = pi.element(theta)
    if el[0] == "point":
        return float(c(el[1]))
    _, a, b = el
    return c.integral(a, b) / (b - a)


def pick(xs, agent_vals, principal_vals, tb: TieBreak) -> int:
    """Index of the agent's choice among candidates, ties resolved by ``tb``."""
    agent_vals = np.asarray(agent_vals, dtype=float)
    best = agent_vals.max()
    tied = np.flatnonzero(agent_vals >= best - TIE_TOL)
    if len(tied) == 1:
        return int(tied[0])
    xs = np.asarray(xs, dtype=float)
    pv = np.asarray(principal_vals, dtype=float)[tied]
    if tb == TieBreak.LOWEST:
        return int(tied[np.argmin(xs[tied])])
    if tb == TieBreak.PRINCIPAL_WORST:
        k = np.flatnonzero(pv <= pv.min() + TIE_TOL)
    else:
        k = np.flatnonzero(pv >= pv.max() - TIE_TOL)
    # among principal-equivalent options take the lowest decision
    cand = tied[k]
    return int(cand[np.argmin(xs[cand])])


# ---------------------------------------------------------------------------
# vectorized primitives shared with the valuation module
# ---------------------------------------------------------------------------

def peak(u: Field, thetas, a: float, b: float, iters: int = 64) -> np.ndarray:
    """Maximizer over [a, b] of the concave level x -> integral of u(theta, .)."""
    th = np.atleast_1d(np.asarray(thetas, dtype=float))
    lo = np.full(th.shape, float(a))
    hi = np.full(th.shape, float(b))
    if b <= a:
        return lo
    ua = u.eval(th, lo)
    ub = u.eval(th, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = u.eval(th, mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    x = 0.5 * (lo + hi)
    x = np.where(ua <= 0, a, x)
    x = np.where(ub >= 0, b, x)
    return x


def tau(u: Field, xs, s_lo: float, s_hi: float, iters: int = 64) -> np.ndarray:
    """inf{theta : u(theta, x) >= 0}; s_hi when the set is empty."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lo = np.full(xs.shape, float(s_lo))
    hi = np.full(xs.shape, float(s_hi))
    at_lo = u.eval(lo, xs) >= 0
    at_hi = u.eval(hi, xs) >= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = u.eval(mid, xs) >= 0
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    t = hi
    t = np.where(at_lo, s_lo, t)
    t = np.where(at_hi, t, s_hi)
    return t


def row_argmax(agent_row: PiecewisePoly, principal_row: PiecewisePoly, anchor: float, tb: TieBreak,
               lo: float | None = None, hi: float | None = None) -> float:
    """Argmax over [lo, hi] of x -> integral_anchor^x agent_row, exact candidate search."""
    lo = agent_row.lo if lo is None else lo
    hi = agent_row.hi if hi is None else hi
    cands = [lo, hi]
    cands += [float(t) for t in agent_row.breaks if lo < t < hi]
    cands += [float(t) for t in agent_row.roots(0.0, lo, hi)]
    xs = np.unique(np.asarray(cands))
    A = agent_row.antiderivative(anchor)
    P = principal_row.antiderivative(anchor)
    k = pick(xs, A(xs), P(xs), tb)
    return float(xs[k])


# ---------------------------------------------------------------------------
# public best responses
# ---------------------------------------------------------------------------

def best_decision_delegation(p: Primitive, pi: MonotoneSet, theta: float,
                             tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED) -> float:
    """The agent's favourite permitted decision at state ``theta``."""
    if p.orientation != DELEGATION:
        raise WrongOrientation("expected a delegation primitive")
    xs = np.array([float(peak(p.agent, theta, a, b)[0]) for a, b in pi.intervals])
    k = pick(xs, p.agent_level(theta, xs), p.principal_level(theta, xs), tb)
    return float(xs[k])


def best_decision_persuasion(p: Primitive, pi: MonotoneSet, theta: float,
                             tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED) -> float:
    """The agent's decision after learning the partition element of ``theta``."""
    if p.orientation != PERSUASION:
        raise WrongOrientation("expected a persuasion primitive")
    el = pi.element(theta)
    if el[0] == "point":
        ar, pr = p.agent.row(el[1]), p.principal.row(el[1])
    else:
        _, a, b = el
        ar, pr = p.agent.theta_integral(a, b), p.principal.theta_integral(a, b)
    return row_argmax(ar, pr, p.anchor, tb)


def decision_schedule(p: Primitive, pi: MonotoneSet, thetas, tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED):
    fn = best_decision_delegation if p.orientation == DELEGATION else best_decision_persuasion
    return np.array([fn(p, pi, float(t), tb) for t in np.atleast_1d(thetas)])
