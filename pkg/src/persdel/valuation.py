"""Expected payoffs for a given set, the value function nu, and the reduced objective."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .agent import TIE_TOL, TieBreak, peak, row_argmax, tau
from .domain import DELEGATION, MonotoneSet, Primitive, QuantileDistribution
from .equivalence import quantile_reparameterize
from .errors import DomainMismatch, MissingDensity, UnbalancedSet
from .poly import PiecewisePoly

GL_NODES = 16
GL_SUBDIV = 4


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_integrate(fn, cuts, n: int = GL_NODES, subdiv: int = GL_SUBDIV) -> float:
    """Composite Gauss-Legendre over consecutive ``cuts`` (each gap split ``subdiv`` times)."""
    cuts = np.unique(np.asarray(cuts, dtype=float))
    if len(cuts) < 2:
        return 0.0
    fine = np.unique(np.concatenate([np.linspace(a, b, subdiv + 1) for a, b in zip(cuts[:-1], cuts[1:])]))
    a, b = fine[:-1], fine[1:]
    a, b = a[b > a], b[b > a]
    x, w = _gauss(n)
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(fn(pts.ravel()))
    if vals.ndim == 2:
        # several integrands sharing the same nodes
        vals = vals.reshape((vals.shape[0],) + pts.shape)
        return np.sum(half[:, None] * w[None, :] * vals, axis=(1, 2))
    return float(np.sum(half[:, None] * w[None, :] * vals.reshape(pts.shape)))


def _within(points, a: float, b: float) -> list[float]:
    return [float(t) for t in np.atleast_1d(points) if a < t < b]


# ---------------------------------------------------------------------------
# expected payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Payoffs:
    principal: float
    agent: float
    state_length: float

    def to_dict(self) -> dict:
        return {"principal": self.principal, "agent": self.agent}


def _require_balanced(pi: MonotoneSet, domain) -> None:
    if not np.allclose(pi.domain, domain):
        raise DomainMismatch(f"set domain {pi.domain} differs from {tuple(domain)}")
    if not pi.balanced:
        raise UnbalancedSet("the set must contain both endpoints of its domain")


def expected_payoffs(p: Primitive, pi: MonotoneSet, tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED) -> Payoffs:
    """Normalized expected payoffs of principal and agent when the principal commits to ``pi``.

    Constant-decision regions are integrated exactly; regions where the decision
    moves with the state use composite Gauss-Legendre between all kinks.
    """
    if p.state_dist is not None and not p.state_dist.is_uniform:
        p = quantile_reparameterize(p)
    if p.orientation == DELEGATION:
        _require_balanced(pi, p.decision_domain)
        P, A = _delegation_integrals(p, pi, tb)
    else:
        _require_balanced(pi, p.state_domain)
        P, A = _persuasion_integrals(p, pi, tb)
    L = p.state_domain[1] - p.state_domain[0]
    return Payoffs(P / L, A / L, L)


def _const_integral(p: Primitive, x: float, t0: float, t1: float) -> tuple[float, float]:
    """Integral over [t0, t1] of the normalized payoffs at a fixed decision."""
    if t1 <= t0:
        return 0.0, 0.0
    pv = p.principal.level_column(x, p.anchor).integral(t0, t1)
    av = p.agent.level_column(x, p.anchor).integral(t0, t1)
    return pv, av


def _moving_integral(p: Primitive, t0: float, t1: float, a: float, b: float) -> tuple[float, float]:
    """Integral over [t0, t1] of payoffs at the agent's peak inside [a, b]."""
    if t1 <= t0:
        return 0.0, 0.0
    u = p.agent
    cuts = [t0, t1]
    cuts += _within(u.state_breaks, t0, t1) + _within(p.principal.state_breaks, t0, t1)
    xb = [x for x in np.concatenate([u.decision_breaks, p.principal.decision_breaks]) if a <= x <= b] + [a, b]
    cuts += _within(tau(u, np.asarray(xb), *p.state_domain), t0, t1)

    def both(th):
        x = peak(u, th, a, b)
        return np.vstack([p.principal_level(th, x), p.agent_level(th, x)])

    pv, av = gauss_integrate(both, cuts)
    return float(pv), float(av)


def _gap_integral(p: Primitive, r: float, l: float, t0: float, t1: float,
                  tb: TieBreak) -> tuple[float, float]:
    """States whose unconstrained optimum lies in the gap (r, l): the agent picks r or l."""
    if t1 <= t0:
        return 0.0, 0.0
    anc = p.anchor
    ar, al = p.agent.level_column(r, anc), p.agent.level_column(l, anc)
    pr, pl = p.principal.level_column(r, anc), p.principal.level_column(l, anc)
    delta = al - ar
    dv = pl - pr
    cuts = [t0, t1] + _within(delta.breaks, t0, t1) + _within(delta.roots(0.0, t0, t1), t0, t1)
    cuts += _within(dv.breaks, t0, t1) + _within(dv.roots(0.0, t0, t1), t0, t1)
    cuts = np.unique(cuts)
    P = A = 0.0
    for s, e in zip(cuts[:-1], cuts[1:]):
        if e <= s:
            continue
        mid = 0.5 * (s + e)
        dl = float(delta(mid))
        if dl > TIE_TOL:
            take_l = True
        elif dl < -TIE_TOL:
            take_l = False
        elif tb == TieBreak.LOWEST:
            take_l = False
        else:
            gain = float(dv(mid))
            if abs(gain) <= TIE_TOL:
                take_l = False
            else:
                take_l = gain > 0 if tb == TieBreak.PRINCIPAL_PREFERRED else gain < 0
        P += (pl if take_l else pr).integral(s, e)
        A += (al if take_l else ar).integral(s, e)
    return P, A


def _delegation_integrals(p: Primitive, pi: MonotoneSet, tb: TieBreak) -> tuple[float, float]:
    s_lo, s_hi = p.state_domain
    x_lo, x_hi = p.decision_domain
    comps = pi.intervals
    ends = sorted({v for iv in comps for v in iv})
    tv = dict(zip(ends, tau(p.agent, np.asarray(ends), s_lo, s_hi)))
    tv[x_lo] = s_lo

    def T(x):
        return float(tv[x])

    P = A = 0.0
    for k, (a, b) in enumerate(comps):
        last = k == len(comps) - 1
        t0, t1 = T(a), (s_hi if last else T(b))
        if b > a or last:
            if b > a:
                dp, da = _moving_integral(p, t0, t1, a, b)
            else:
                dp, da = _const_integral(p, a, t0, t1)
            P, A = P + dp, A + da
        if not last:
            r, l = b, comps[k + 1][0]
            dp, da = _gap_integral(p, r, l, T(r), T(l), tb)
            P, A = P + dp, A + da
    return P, A


def _persuasion_integrals(p: Primitive, pi: MonotoneSet, tb: TieBreak) -> tuple[float, float]:
    x_lo, x_hi = p.decision_domain
    P = A = 0.0
    for a, b in pi.pools():
        ar, pr = p.agent.theta_integral(a, b), p.principal.theta_integral(a, b)
        x = row_argmax(ar, pr, p.anchor, tb)
        P += float(pr.antiderivative()(x) - pr.antiderivative()(p.anchor))
        A += float(ar.antiderivative()(x) - ar.antiderivative()(p.anchor))
    for a, b in pi.separated():
        dp, da = _moving_integral(p, a, b, x_lo, x_hi)
        P, A = P + dp, A + da
    return P, A


def pool_decision(p: Primitive, a: float, b: float, tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED) -> float:
    return row_argmax(p.agent.theta_integral(a, b), p.principal.theta_integral(a, b), p.anchor, tb)


# ---------------------------------------------------------------------------
# nu
# ---------------------------------------------------------------------------

def extend_to(p: PiecewisePoly, lo: float, hi: float) -> PiecewisePoly:
    """Continue ``p`` beyond its domain with the polynomials of its end pieces."""
    if lo < p.lo or hi > p.hi:
        p = p.extend(min(lo, p.lo), max(hi, p.hi), p.piece_global(0), p.piece_global(p.npieces - 1))
    return p


def _extrapolate(p: PiecewisePoly, m):
    m = np.asarray(m, dtype=float)
    out = np.asarray(p(np.clip(m, p.lo, p.hi)), dtype=float)
    if np.any(m < p.lo) or np.any(m > p.hi):
        pv = np.polynomial.polynomial.polyval
        out = np.where(m < p.lo, pv(m, p.piece_global(0)), out)
        out = np.where(m > p.hi, pv(m, p.piece_global(p.npieces - 1)), out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class NuFunction:
    """Principal's payoff as a function of the posterior mean, with its exact derivative.

    ``core`` is the range of means over which the agent's decision is interior.
    """

    nu: PiecewisePoly
    dnu: PiecewisePoly
    provenance: str
    core: tuple[float, float]
    params: dict = field(default_factory=dict)

    def __call__(self, m):
        return _extrapolate(self.nu, m)

    def slope(self, m):
        return _extrapolate(self.dnu, m)

    def over(self, lo: float, hi: float) -> PiecewisePoly:
        """nu as a piecewise polynomial on [lo, hi], continued by its end pieces."""
        return extend_to(self.nu, lo, hi)

    @property
    def domain(self) -> tuple[float, float]:
        return self.nu.domain

    def slope_right(self, m: float) -> float:
        return float(extend_to(self.dnu, m - 1, m + 1)(m))

    def slope_left(self, m: float) -> float:
        return float(extend_to(self.dnu, m - 1, m + 1).left_limit(m))

    @property
    def tail_slope(self) -> float:
        """Slope of nu above the core."""
        return float(self.dnu.left_limit(self.nu.hi))

    def table(self, n: int = 1001) -> np.ndarray:
        m = np.linspace(*self.domain, n)
        return np.column_stack([m, self.nu(m), self.dnu(m)])


def nu_from_parts(binv: PiecewisePoly, d: PiecewisePoly, w: PiecewisePoly, x_lo: float, x_hi: float,
                  m_lo: float, m_hi: float, provenance: str, params: dict | None = None) -> NuFunction:
    """nu(m) = integral_{x_lo}^{xbar(m)} (m - d(s)) w(s) ds with xbar = binv clamped to [x_lo, x_hi].

    ``binv`` is increasing and maps its domain (the core) onto [x_lo, x_hi].
    """
    W = w.antiderivative()
    DW = (d * w).antiderivative()
    W0, DW0 = float(W(x_lo)), float(DW(x_lo))
    W1, DW1 = float(W.left_limit(x_hi)), float(DW.left_limit(x_hi))
    core = PiecewisePoly.identity(*binv.domain) * (W.compose(binv) - W0) - (DW.compose(binv) - DW0)
    # always keep one unit of each tail so that end pieces carry the tail formulas
    lo = min(m_lo, binv.lo - 1.0)
    hi = max(m_hi, binv.hi + 1.0)
    nu = core.extend(lo, hi, [0.0], [-(DW1 - DW0), W1 - W0])
    return NuFunction(nu, nu.derivative(), provenance, binv.domain, params or {})


def regulation_nu(f: PiecewisePoly, theta_bar: float = 1.0) -> NuFunction:
    """nu(m) = integral_0^{2m-1} (m - g) f(g) dg, zero for m <= 1/2 and m - E[g] for m >= 1."""
    if f is None:
        raise MissingDensity("regulation requires a cost density")
    binv = PiecewisePoly.polynomial([-1.0, 2.0], 0.5, 1.0)
    return nu_from_parts(binv, PiecewisePoly.identity(*f.domain), f, 0.0, 1.0, 0.0, theta_bar,
                         "regulation", {"theta_bar": theta_bar})


def linear_nu(b: PiecewisePoly, d: PiecewisePoly, c: PiecewisePoly, weight: PiecewisePoly | None = None,
              provenance: str = "linear") -> NuFunction:
    """nu for a linear persuasion problem: the agent's decision solves b(x) = m."""
    if not b.is_piecewise_affine():
        raise NotImplementedError("nu needs a piecewise-affine b so that its inverse is exact")
    binv = b.inverse()
    w = weight if weight is not None else PiecewisePoly.constant(1.0, *b.domain)
    m_lo = min(float(c(c.lo)), binv.lo)
    m_hi = max(float(c.left_limit(c.hi)), binv.hi)
    return nu_from_parts(binv, d, w, b.lo, b.hi, m_lo, m_hi, provenance)


def build_nu(p: Primitive) -> NuFunction:
    """nu of a linear primitive in either orientation (both share the same b, c, d)."""
    if p.linear is None:
        raise ValueError("nu is defined for linear primitives only")
    if p.state_dist is not None and not p.state_dist.is_uniform:
        p = quantile_reparameterize(p)
    L = p.linear
    return linear_nu(L.b, L.d, L.c, provenance="linear_" + p.orientation)


def ms1991_nu(k: float) -> NuFunction:
    """f = 1, d(t) = k t on [0, 1]: nu(m) = m^2 (2 - k) / 2 on the core."""
    one = PiecewisePoly.constant(1.0)
    return nu_from_parts(PiecewisePoly.identity(), PiecewisePoly.polynomial([0.0, k]), one, 0.0, 1.0,
                         0.0, 1.0, "ms1991", {"k": k})


def expected_nu(pi: MonotoneSet, nu: NuFunction, c: PiecewisePoly,
                F: QuantileDistribution | None = None) -> float:
    """E[nu(m(theta))] with m the posterior mean of c; pools contribute length * nu(pool mean)."""
    if F is not None and not F.is_uniform:
        if F.quantile is None:
            raise ValueError("a non-uniform state needs a quantile function here")
        c = c.compose(F.quantile)
    _require_balanced(pi, c.domain)
    nc = nu.over(float(c(c.lo)), float(c.left_limit(c.hi))).compose(c)
    total = 0.0
    for a, b in pi.separated():
        total += nc.integral(a, b)
    for a, b in pi.pools():
        total += (b - a) * float(nu(c.integral(a, b) / (b - a)))
    return total / (c.hi - c.lo)
