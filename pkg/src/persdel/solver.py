"""Price-function certificates and analytic solvers for linear problems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect as _scipy_bisect

from .domain import DELEGATION, MonotoneSet, Primitive, QuantileDistribution
from .errors import BracketFailure, NotUnimodal, UnboundedV, WrongOrientation
from .poly import PiecewisePoly
from .valuation import NuFunction, expected_nu, extend_to, regulation_nu

TOL = 1e-9
VERIFY_GRID = 2049
XTOL = 1e-12
MAXITER = 200


def bisect(fn, a: float, b: float, xtol: float = XTOL, maxiter: int = MAXITER) -> float:
    """Root of ``fn`` on [a, b]; BracketFailure when the endpoint signs agree."""
    fa, fb = fn(a), fn(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if not (np.isfinite(fa) and np.isfinite(fb)) or np.sign(fa) == np.sign(fb):
        raise BracketFailure(f"no sign change on [{a}, {b}] (values {fa}, {fb})")
    return float(_scipy_bisect(fn, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=maxiter))


def concat_pieces(pieces: list[tuple[float, float, PiecewisePoly]]) -> PiecewisePoly:
    """Glue consecutive (lo, hi, poly) segments into one piecewise polynomial."""
    breaks: list[float] = []
    rows: list[np.ndarray] = []
    for lo, hi, p in pieces:
        if hi <= lo:
            continue
        seg = p.restrict(lo, hi)
        if breaks and abs(breaks[-1] - seg.lo) > 1e-12:
            raise ValueError("pieces must be contiguous")
        if not breaks:
            breaks.append(seg.lo)
        breaks.extend(seg.breaks[1:])
        rows.extend(seg.coeffs[i] for i in range(seg.npieces))
    return PiecewisePoly(breaks, rows)


def _line(m0: float, v0: float, slope: float, lo: float, hi: float) -> PiecewisePoly:
    return PiecewisePoly.polynomial([v0 - slope * m0, slope], lo, hi)


_on_domain = extend_to


# ---------------------------------------------------------------------------
# price function and certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Certificate:
    p_fn: PiecewisePoly
    convexity_residual: float
    dominance_gap: float
    verdict: str
    witness: float | None = None
    tol: float = TOL
    conditions: dict = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return self.verdict == "Verified"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": self.witness,
            "convexity_residual": self.convexity_residual,
            "dominance_gap": self.dominance_gap,
            "tol": self.tol,
            "conditions": {k: bool(v) for k, v in self.conditions.items()},
            "p_fn": self.p_fn.to_dict(),
        }


def _mean(C: PiecewisePoly, c: PiecewisePoly, a: float, b: float) -> float:
    if b - a <= 1e-15:
        return float(c(a))
    return float(C.left_limit(b) - C(a)) / (b - a) if b >= C.hi else float(C(b) - C(a)) / (b - a)


def tangent_at(nu: NuFunction, m: float, lo: float, hi: float) -> PiecewisePoly:
    nf = _on_domain(nu.nu, lo, hi)
    df = _on_domain(nu.dnu, lo, hi)
    return _line(m, float(nf(m)), float(df(m)), lo, hi)


def price_function(pi: MonotoneSet, nu: NuFunction, c: PiecewisePoly,
                   F: QuantileDistribution | None = None) -> PiecewisePoly:
    """nu on separated means, the tangent at the pool mean on each pool, as a function of m = c(s)."""
    if F is not None and not F.is_uniform:
        c = c.compose(F.quantile)
    C = c.antiderivative()
    m_lo, m_hi = float(c(c.lo)), float(c.left_limit(c.hi))
    nf = _on_domain(nu.nu, m_lo, m_hi)
    pieces = []
    segs = [("sep", a, b) for a, b in pi.separated()] + [("pool", a, b) for a, b in pi.pools()]
    segs.sort(key=lambda t: t[1])
    for kind, a, b in segs:
        lo, hi = float(c(a)), float(c.left_limit(b)) if b >= c.hi else float(c(b))
        if kind == "sep":
            pieces.append((lo, hi, nf))
        else:
            m = _mean(C, c, a, b)
            pieces.append((lo, hi, tangent_at(nu, m, m_lo, m_hi)))
    return concat_pieces(pieces)


def _grid(lo: float, hi: float, extra, n: int = VERIFY_GRID) -> np.ndarray:
    pts = np.concatenate([np.linspace(lo, hi, n), [t for t in extra if lo <= t <= hi]])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-9])
    return pts[keep]


def certify(p: PiecewisePoly, nu: NuFunction, tol: float = TOL, conditions: dict | None = None) -> Certificate:
    """Check that ``p`` is convex and dominates nu on the domain of ``p``."""
    nf = _on_domain(nu.nu, p.lo, p.hi)
    m = _grid(p.lo, p.hi, list(p.breaks) + list(nf.breaks))
    # evaluate each node from the right, the last one from the left
    pv = np.concatenate([p(m[:-1]), [p.left_limit(m[-1])]])
    # a jump at a breakpoint shows up as a steep secant through left and right limits
    slopes = np.diff(pv) / np.diff(m)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    jumps = np.abs(p.jumps())
    sd = np.diff(slopes)
    conv = float(sd.min()) if len(sd) else 0.0
    if len(jumps) and jumps.max() > tol * scale:
        k = int(np.argmax(jumps))
        conv = min(conv, -float(jumps[k]))
    nv = np.concatenate([nf(m[:-1]), [nf.left_limit(m[-1])]])
    gap_v = pv - nv
    dom = float(gap_v.min())
    conditions = dict(conditions or {})
    ok = conv >= -tol * scale and dom >= -tol * max(1.0, float(np.max(np.abs(nv))))
    ok = ok and all(conditions.values())
    witness = None
    if not ok:
        if dom < -tol:
            witness = float(m[int(np.argmin(gap_v))])
        elif len(sd) and sd.min() < -tol * scale:
            witness = float(m[int(np.argmin(sd)) + 1])
        elif len(jumps) and jumps.max() > tol * scale:
            witness = float(p.breaks[1:-1][int(np.argmax(jumps))])
        else:
            witness = float(m[int(np.argmin(gap_v))])
    return Certificate(p, conv, dom, "Verified" if ok else "Refuted", witness, tol, conditions)


def verify_optimal(pi: MonotoneSet, nu: NuFunction, c: PiecewisePoly, F: QuantileDistribution | None = None,
                   tol: float = TOL) -> Certificate:
    return certify(price_function(pi, nu, c, F), nu, tol)


# ---------------------------------------------------------------------------
# regulation
# ---------------------------------------------------------------------------

def check_unimodal(f: PiecewisePoly, n: int = 1024) -> float:
    """Mode of ``f``; NotUnimodal unless f rises strictly to an interior mode and then falls strictly."""
    g = np.linspace(f.lo, f.hi, n + 1)
    v = f(g[:-1]).tolist() + [float(f.left_limit(g[-1]))]
    v = np.asarray(v)
    k = int(np.argmax(v))
    dv = np.diff(v)
    if k == 0 or k == n or np.any(dv[:k] <= 0) or np.any(dv[k:] >= 0):
        raise NotUnimodal("density must increase strictly to an interior mode and then decrease strictly")
    lo, hi = g[max(k - 1, 0)], g[min(k + 1, n)]
    d = f.derivative()
    cands = [t for t in d.roots(0.0, lo, hi)] + [t for t in f.breaks if lo <= t <= hi]
    if not cands:
        return float(g[k])
    vals = [max(float(f(t)), float(f.left_limit(t)) if t > f.lo else -np.inf) for t in cands]
    return float(cands[int(np.argmax(vals))])


@dataclass(frozen=True, eq=False)
class RegulationSolution:
    theta_star: float
    theta_bar: float
    foc_residual: float
    bracket: tuple[float, float]
    price_fn: PiecewisePoly
    mode: float
    nu: NuFunction
    pi: MonotoneSet
    value: float
    identity_residual: float
    bracket_source: str
    certificate: Certificate

    def to_dict(self) -> dict:
        return {
            "theta_star": self.theta_star,
            "theta_bar": self.theta_bar,
            "foc_residual": self.foc_residual,
            "identity_residual": self.identity_residual,
            "bracket": list(self.bracket),
            "bracket_source": self.bracket_source,
            "mode": self.mode,
            "value": self.value,
            "pi": self.pi.to_list(),
            "certificate": self.certificate.verdict,
            "price_fn": self.price_fn.to_dict(),
        }


def tangency_residual(nu: NuFunction, theta: float, theta_bar: float) -> float:
    """nu(M) - nu(theta) - (M - theta) nu'(M) with M the mean of the censored pool (theta, theta_bar)."""
    M = 0.5 * (theta_bar + theta)
    return float(nu(M) - nu(theta) - (M - theta) * nu.dnu(M))


def gain_loss_residual(f: PiecewisePoly, theta: float, theta_bar: float) -> float:
    """Marginal gain minus marginal loss of lowering the cap (exit or price-distance form)."""
    G = (f * PiecewisePoly.identity(*f.domain)).antiderivative()
    Fc = f.antiderivative()

    def I(a, b):  # integral_a^b (theta - g) f(g) dg, clipped to the support
        a, b = max(a, f.lo), min(b, f.hi)
        if b <= a:
            return 0.0
        return theta * float(Fc(b) - Fc(a)) - float(G(b) - G(a))

    gain = I(2 * theta - 1, theta)
    if theta_bar == 1.0:
        loss = 0.5 * (1 - theta) ** 2 * float(f(theta))
    else:
        loss = -I(theta, 1.0)
    return gain - loss


def regulation_price_fn(theta_star: float, theta_bar: float) -> PiecewisePoly:
    """Price chosen by a monopolist with marginal cost g when prices in [0, theta_star] U {theta_bar} are allowed."""
    k = 2 * theta_star - 1
    exit_at = theta_bar + theta_star - 1
    pieces = []
    if k > 0:
        pieces.append((0.0, k, PiecewisePoly.polynomial([0.5, 0.5], 0.0, k)))
    a = max(k, 0.0)
    b = min(max(exit_at, a), 1.0)
    if b > a:
        pieces.append((a, b, PiecewisePoly.constant(theta_star, a, b)))
    if b < 1.0:
        pieces.append((b, 1.0, PiecewisePoly.constant(theta_bar, b, 1.0)))
    return concat_pieces(pieces)


def solve_upper_censorship(f: PiecewisePoly, theta_bar: float = 1.0) -> RegulationSolution:
    """Cutoff of the optimal upper-censorship partition [0, theta*] U {theta_bar} for a unimodal cost density."""
    if theta_bar < 1.0:
        raise ValueError("theta_bar must be at least 1")
    gm = check_unimodal(f)
    nu = regulation_nu(f, theta_bar)

    def R(t):
        return tangency_residual(nu, t, theta_bar)

    brackets = [
        ("tight", (max(0.0, 1 + gm - theta_bar), 0.5 * (1 + gm))),
        ("widened", (0.0, 0.5 * (1 + gm))),
        ("full", (0.0, 1.0)),
    ]
    theta = None
    for source, (lo, hi) in brackets:
        # endpoints sit on the boundary of the claimed open interval; nudge inside
        a, b = lo + 1e-14, hi - 1e-14
        try:
            theta = bisect(R, a, b)
            break
        except BracketFailure:
            continue
    if theta is None:
        raise BracketFailure("tangency residual has no sign change on any bracket")
    pi = MonotoneSet(((0.0, theta), (theta_bar, theta_bar)), (0.0, theta_bar))
    c = PiecewisePoly.identity(0.0, theta_bar)
    cert = verify_optimal(pi, nu, c)
    ident = gain_loss_residual(f, theta, theta_bar) if theta_bar in (1.0, 2.0) else float("nan")
    return RegulationSolution(theta, theta_bar, R(theta), (lo, hi), regulation_price_fn(theta, theta_bar), gm, nu,
                              pi, expected_nu(pi, nu, c), ident, source, cert)


# ---------------------------------------------------------------------------
# checkers for one- and two-interval delegation sets
# ---------------------------------------------------------------------------

def _cgrid(nu: NuFunction, lo: float, hi: float, n: int = 1025) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    return _grid(lo, hi, list(nu.nu.breaks), n)


def _convex_on(nu: NuFunction, lo: float, hi: float, tol: float = TOL) -> bool:
    m = _cgrid(nu, lo, hi)
    if len(m) < 3:
        return True
    v = _on_domain(nu.nu, lo, hi)(m)
    s = np.diff(v) / np.diff(m)
    return bool(np.all(np.diff(s) >= -tol * max(1.0, float(np.max(np.abs(s))))))


def _below(nu: NuFunction, line: PiecewisePoly, lo: float, hi: float, tol: float = TOL) -> bool:
    if hi < lo:
        return True
    m = _cgrid(nu, lo, hi)
    return bool(np.all(_on_domain(nu.nu, lo, hi)(m) <= line(m) + tol))


def _tail_line(nu: NuFunction, lo: float, hi: float) -> PiecewisePoly:
    """The line that continues nu above its core (nu(1) + m - 1 in normalized units)."""
    mh = nu.core[1]
    return _line(mh, float(nu(mh)), nu.tail_slope, lo, hi)


def _zero_line(lo: float, hi: float) -> PiecewisePoly:
    return PiecewisePoly.constant(0.0, lo, hi)


def _m_range(nu: NuFunction, c: PiecewisePoly) -> tuple[float, float]:
    return min(float(c(c.lo)), nu.nu.lo), max(float(c.left_limit(c.hi)), nu.nu.hi)


def check_singleton(x_star: float, nu: NuFunction, c: PiecewisePoly, tol: float = TOL) -> Certificate:
    """Conditions for the single permitted decision {x*} (extremes aside)."""
    lo, hi = _m_range(nu, c)
    ms = float(c(x_star))
    tail = _tail_line(nu, lo, hi)
    conds = {
        "nu_nonpositive_left": _below(nu, _zero_line(lo, hi), lo, ms, tol),
        "nu_below_tail_right": _below(nu, tail, ms, hi, tol),
        "lines_meet_at_c_x": abs(float(tail(ms))) <= 1e-7,
    }
    p = concat_pieces([(lo, ms, _zero_line(lo, hi)), (ms, hi, tail)])
    return certify(p, nu, tol, conds)


def check_interval(xL: float, xH: float, nu: NuFunction, c: PiecewisePoly, tol: float = TOL) -> Certificate:
    """Conditions for an interval delegation set [xL, xH]."""
    lo, hi = _m_range(nu, c)
    mL, mH = float(c(xL)), float(c(xH))
    m0, m1 = nu.core
    tail = _tail_line(nu, lo, hi)
    nf = _on_domain(nu.nu, lo, hi)
    conds = {
        "convex_inside": _convex_on(nu, mL, mH, tol),
        "nu_nonpositive_left": _below(nu, _zero_line(lo, hi), lo, mL, tol) and abs(float(nf(mL))) <= 1e-7,
        "nu_below_tail_right": _below(nu, tail, mH, hi, tol) and abs(float(nf(mH) - tail(mH))) <= 1e-7,
        "slope_at_bottom": not (abs(mL - m0) <= 1e-12) or nu.slope_right(m0) >= -tol,
        "slope_at_top": not (abs(mH - m1) <= 1e-12) or nu.slope_left(m1) <= nu.tail_slope + tol,
    }
    p = concat_pieces([(lo, mL, _zero_line(lo, hi)), (mL, mH, nf), (mH, hi, tail)])
    return certify(p, nu, tol, conds)


def check_two_interval(xL: float, xH: float, nu: NuFunction, c: PiecewisePoly, tol: float = TOL) -> Certificate:
    """Conditions for (-inf, xL] U [xH, inf): a single pooled gap whose tangent touches nu at both ends."""
    lo, hi = _m_range(nu, c)
    mL, mH = float(c(xL)), float(c(xH))
    m_star = c.integral(xL, xH) / (xH - xL)
    line = tangent_at(nu, m_star, lo, hi)
    nf = _on_domain(nu.nu, lo, hi)
    m0, m1 = nu.core
    conds = {
        "convex_left": _convex_on(nu, lo, mL, tol),
        "convex_right": _convex_on(nu, mH, hi, tol),
        "tangent_dominates_gap": _below(nu, line, mL, mH, tol),
        "touch_at_ends": abs(float(nf(mL) - line(mL))) <= 1e-7 and abs(float(nf(mH) - line(mH))) <= 1e-7,
        "slope_at_bottom": not (abs(mL - m0) <= 1e-12) or float(nu.dnu(m_star)) >= -tol,
        "slope_at_top": not (abs(mH - m1) <= 1e-12) or float(nu.dnu(m_star)) <= nu.tail_slope + tol,
    }
    p = concat_pieces([(lo, mL, nf), (mL, mH, line), (mH, hi, nf)])
    return certify(p, nu, tol, conds)


def check_floor(x0: float, x_star: float, nu: NuFunction, c: PiecewisePoly, tol: float = TOL) -> Certificate:
    """Conditions for {x0} U [x*, inf) when x0 must always be permitted."""
    lo, hi = float(c(x0)), _m_range(nu, c)[1]
    ms = float(c(x_star))
    m_star = float(c(x0)) if x_star <= x0 else c.integral(x0, x_star) / (x_star - x0)
    line = tangent_at(nu, m_star, lo, hi)
    nf = _on_domain(nu.nu, lo, hi)
    m0, m1 = nu.core
    conds = {
        "convex_above": _convex_on(nu, ms, hi, tol),
        "tangent_dominates_below": _below(nu, line, lo, ms, tol),
        "touch_at_c_x": abs(float(nf(ms) - line(ms))) <= 1e-7,
        "slope_at_bottom": not (abs(ms - m0) <= 1e-12) or nu.slope_right(m0) >= -tol,
        "slope_at_top": not (abs(ms - m1) <= 1e-12) or nu.slope_left(m1) <= nu.tail_slope + tol,
    }
    p = concat_pieces([(lo, ms, line), (ms, hi, nf)])
    return certify(p, nu, tol, conds)


# ---------------------------------------------------------------------------
# curvature classification and constructive solver
# ---------------------------------------------------------------------------

SLOPE_EPS = 1e-12

# Each template lists the elements of the optimal set from left to right.
# ("I", a, b) is an interval, ("P", a) a point; names other than ylo/yhi are unknowns.
TEMPLATES: dict[str, list[tuple]] = {
    "convex/a": [("I", "ylo", "yhi")],
    "convex/b": [("I", "ylo", "xH"), ("P", "yhi")],
    "convex/c": [("P", "ylo"), ("I", "xL", "yhi")],
    "convex/d": [("P", "ylo"), ("I", "xL", "xH"), ("P", "yhi")],
    "concave/a": [("P", "ylo"), ("P", "xL"), ("P", "xH"), ("P", "yhi")],
    "concave/b": [("P", "ylo"), ("P", "xH"), ("P", "yhi")],
    "concave/c": [("P", "ylo"), ("P", "xL"), ("P", "yhi")],
    "convex-concave/a": [("I", "ylo", "xM"), ("P", "yhi")],
    "convex-concave/b": [("I", "ylo", "xM"), ("P", "xH"), ("P", "yhi")],
    "convex-concave/c": [("P", "ylo"), ("I", "xL", "xM"), ("P", "yhi")],
    "convex-concave/d": [("P", "ylo"), ("I", "xL", "xM"), ("P", "xH"), ("P", "yhi")],
    "concave-convex/a": [("P", "ylo"), ("I", "xM", "yhi")],
    "concave-convex/b": [("P", "ylo"), ("P", "xL"), ("I", "xM", "yhi")],
    "concave-convex/c": [("P", "ylo"), ("I", "xM", "xH"), ("P", "yhi")],
    "concave-convex/d": [("P", "ylo"), ("P", "xL"), ("I", "xM", "xH"), ("P", "yhi")],
}

SHAPES = {"convex": "Convex", "concave": "Concave", "convex-concave": "ConvexConcave",
          "concave-convex": "ConcaveConvex"}


def detect_shape(nu: NuFunction, n: int = 512) -> tuple[str, float | None]:
    """Curvature of nu on its core from the signs of second differences; returns (shape, inflection)."""
    from .errors import UnsupportedShape

    m0, m1 = nu.core
    m = np.linspace(m0, m1, n)
    v = nu(m)
    d2 = v[2:] - 2 * v[1:-1] + v[:-2]
    thr = 1e-12 * max(1.0, float(np.max(np.abs(v))))
    sgn = np.where(d2 > thr, 1, np.where(d2 < -thr, -1, 0))
    nz = sgn[sgn != 0]
    if len(nz) == 0 or np.all(nz > 0):
        return "convex", None
    if np.all(nz < 0):
        return "concave", None
    changes = np.flatnonzero(np.diff(nz) != 0)
    if len(changes) > 1:
        raise UnsupportedShape("nu has more than one inflection on its core; supply a candidate set")
    idx = np.flatnonzero(sgn != 0)
    k = idx[changes[0] + 1]
    infl = float(m[k])
    return ("convex-concave" if nz[0] > 0 else "concave-convex"), infl


def select_case(shape: str, nu: NuFunction) -> str:
    s0 = nu.slope_right(nu.core[0])
    s1 = nu.slope_left(nu.core[1])
    t = nu.tail_slope
    ge0, gt0 = s0 >= -SLOPE_EPS, s0 > SLOPE_EPS
    le1, lt1 = s1 <= t + SLOPE_EPS, s1 < t - SLOPE_EPS
    if shape == "convex":
        return "convex/" + ("a" if ge0 and le1 else "b" if ge0 else "c" if le1 else "d")
    if shape == "concave":
        if not gt0:
            return "concave/b"
        if not lt1:
            return "concave/c"
        return "concave/a"
    if shape == "convex-concave":
        return "convex-concave/" + ("a" if ge0 and not lt1 else "b" if ge0 else "c" if not lt1 else "d")
    # concave near the bottom, convex near the top
    return "concave-convex/" + ("a" if not gt0 and le1 else "b" if le1 else "c" if not gt0 else "d")


class _System:
    """First-order conditions of a template: tangency at interval ends, continuity at interior points."""

    def __init__(self, template, nu: NuFunction, c: PiecewisePoly):
        self.template = template
        self.nu = nu
        self.c = c
        self.C = c.antiderivative()
        lo, hi = _m_range(nu, c)
        self.nf = _on_domain(nu.nu, lo, hi)
        self.df = _on_domain(nu.dnu, lo, hi)
        self.fixed = {"ylo": c.lo, "yhi": c.hi}
        self.unknowns = [n for el in template for n in el[1:] if n not in self.fixed]
        self.unknowns = list(dict.fromkeys(self.unknowns))

    def _ends(self, el):
        return (el[1], el[1]) if el[0] == "P" else (el[1], el[2])

    def neighbours(self, name):
        """(left pool ends, right pool ends, role) for an unknown."""
        for k, el in enumerate(self.template):
            left, right = self._ends(el)
            if name not in (left, right):
                continue
            lp = (self._ends(self.template[k - 1])[1], left) if k > 0 else None
            rp = (right, self._ends(self.template[k + 1])[0]) if k + 1 < len(self.template) else None
            if el[0] == "P":
                return lp, rp, "point"
            return (lp if name == left else None), (rp if name == right else None), "edge"
        raise KeyError(name)

    def deps(self, name) -> set:
        lp, rp, _ = self.neighbours(name)
        out = set()
        for pool in (lp, rp):
            if pool:
                out |= {n for n in pool if n in self.unknowns and n != name}
        return out

    def _tangent(self, a, b, m):
        if not b > a:
            return np.nan
        M = float(self.C(b) - self.C(a)) / (b - a)
        return float(self.nf(M) + self.df(M) * (m - M))

    def residual(self, name, vals: dict) -> float:
        env = {**self.fixed, **vals}
        lp, rp, role = self.neighbours(name)
        x = env[name]
        m = float(self.c(x))
        tl = self._tangent(env[lp[0]], env[lp[1]], m) if lp else None
        tr = self._tangent(env[rp[0]], env[rp[1]], m) if rp else None
        if role == "point":
            return tl - tr
        return float(self.nf(m)) - (tl if tl is not None else tr)

    def build(self, vals: dict) -> MonotoneSet | None:
        env = {**self.fixed, **vals}
        ivs = []
        for el in self.template:
            a, b = self._ends(el)
            ivs.append((env[a], env[b]))
        for (a0, b0), (a1, b1) in zip(ivs[:-1], ivs[1:]):
            if not b0 < a1 or b0 < a0:
                return None
        return MonotoneSet(tuple(ivs), (self.c.lo, self.c.hi))


def _scan_roots(fn, lo: float, hi: float, extra=(), n: int = 96) -> list[float]:
    xs = np.unique(np.concatenate([np.linspace(lo, hi, n + 2)[1:-1], [t for t in extra if lo < t < hi]]))
    vals = np.array([fn(x) for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        a, b, fa, fb = xs[i], xs[i + 1], vals[i], vals[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0:
            roots.append(float(a))
        elif np.sign(fa) != np.sign(fb) and fb != 0:
            try:
                roots.append(bisect(fn, a, b))
            except BracketFailure:
                pass
    if len(vals) and np.isfinite(vals[-1]) and vals[-1] == 0:
        roots.append(float(xs[-1]))
    return roots


def _solve_template(sys_: _System, extra_pts) -> list[dict]:
    """All solutions of the template's conditions found by scanning plus (nested) bisection."""
    lo, hi = sys_.c.lo, sys_.c.hi
    remaining = list(sys_.unknowns)
    groups = []
    while remaining:
        g = [remaining.pop(0)]
        for other in list(remaining):
            if other in sys_.deps(g[0]) or g[0] in sys_.deps(other):
                g.append(other)
                remaining.remove(other)
        groups.append(g)
    partial: list[dict] = [{}]
    for g in groups:
        new = []
        if len(g) == 1:
            (u,) = g
            for r in _scan_roots(lambda x: sys_.residual(u, {u: x}), lo, hi, extra_pts):
                new += [{**p, u: r} for p in partial]
        elif len(g) == 2:
            inner, outer = g
            for branch in range(3):
                def inner_root(xo, branch=branch):
                    rs = _scan_roots(lambda x: sys_.residual(inner, {inner: x, outer: xo}), lo, hi, extra_pts, 64)
                    return rs[branch] if len(rs) > branch else np.nan

                def outer_res(xo):
                    xi = inner_root(xo)
                    if not np.isfinite(xi):
                        return np.nan
                    return sys_.residual(outer, {inner: xi, outer: xo})

                for r in _scan_roots(outer_res, lo, hi, extra_pts, 64):
                    xi = inner_root(r)
                    if np.isfinite(xi):
                        new += [{**p, inner: xi, outer: r} for p in partial]
        else:
            raise NotImplementedError("coupled systems of more than two unknowns")
        partial = new
    return partial


@dataclass(frozen=True, eq=False)
class LinearSolution:
    shape: str
    case: str
    pi: MonotoneSet
    certificate: Certificate
    value: float
    points: dict
    multiplicity: int
    fallback: bool
    inflection: float | None

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "case": self.case,
            "pi": self.pi.to_list(),
            "value": self.value,
            "points": self.points,
            "multiplicity": self.multiplicity,
            "fallback": self.fallback,
            "inflection": self.inflection,
            "certificate": self.certificate.to_dict(),
        }


def _candidates(case: str, nu: NuFunction, c: PiecewisePoly, extra) -> list[tuple[str, MonotoneSet, dict]]:
    sys_ = _System(TEMPLATES[case], nu, c)
    out = []
    for vals in _solve_template(sys_, extra):
        pi = sys_.build(vals)
        if pi is not None:
            out.append((case, pi, vals))
    return out


def classify_and_solve(nu: NuFunction, c: PiecewisePoly, F: QuantileDistribution | None = None) -> LinearSolution:
    """Detect the curvature of nu, build the matching candidate set and certify it.

    If the dispatched template yields no verified candidate, every other template is
    tried and the best verified set is returned with ``fallback`` set.
    """
    if F is not None and not F.is_uniform:
        c = c.compose(F.quantile)
    shape, infl = detect_shape(nu)
    case = select_case(shape, nu)
    key_m = list(nu.core) + ([infl] if infl is not None else []) + [float(nu.core[1] - nu(nu.core[1]))]
    mlo, mhi = float(c(c.lo)), float(c.left_limit(c.hi))
    extra = [float(c.invert_values(m)) for m in key_m if mlo < m < mhi]

    def evaluate(cands):
        scored = []
        for cs, pi, vals in cands:
            cert = verify_optimal(pi, nu, c)
            scored.append((cert.verified, expected_nu(pi, nu, c), cs, pi, vals, cert))
        return scored

    scored = evaluate(_candidates(case, nu, c, extra))
    fallback = False
    if not any(s[0] for s in scored):
        fallback = True
        for other in TEMPLATES:
            if other != case:
                scored += evaluate(_candidates(other, nu, c, extra))
    if not scored:
        raise BracketFailure(f"no candidate solves the conditions of case {case}")
    scored.sort(key=lambda s: (s[0], s[1]), reverse=True)
    ok, val, cs, pi, vals, cert = scored[0]
    n_ver = sum(1 for s in scored if s[0] and abs(s[1] - val) > 1e-9) + 1 if ok else 0
    return LinearSolution(SHAPES[shape], cs, pi, cert, val, {k: float(v) for k, v in vals.items()},
                          n_ver, fallback, infl)


# ---------------------------------------------------------------------------
# bounded decision space for linear delegation on a wide declared domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundingInterval:
    y_lo: float
    y_hi: float
    Z: tuple[float, float]
    X: tuple[float, float]
    margin: float
    z0: float

    def to_dict(self) -> dict:
        return {"y_lo": self.y_lo, "y_hi": self.y_hi, "Z": list(self.Z), "X": list(self.X),
                "margin": self.margin, "z0": self.z0}


def _outer_root(fn, vals: np.ndarray, xs: np.ndarray, side: str) -> float:
    """Extreme point where ``fn >= 0``, located on the grid and refined by bisection."""
    ok = np.flatnonzero(vals >= -1e-12)
    i = ok[0] if side == "lo" else ok[-1]
    j = i - 1 if side == "lo" else i + 1
    if j < 0 or j >= len(xs) or vals[i] <= 0:
        return float(xs[i])
    return bisect(fn, float(min(xs[i], xs[j])), float(max(xs[i], xs[j])))


def bounding_interval(p: Primitive, z0: float, n: int = 8001, n_states: int = 257) -> BoundingInterval:
    """Finite decision bracket outside of which no balanced delegation set needs decisions.

    Z collects decisions some type of principal weakly prefers to ``z0``; X adds the decisions
    the extreme agent types rank above the far end of Z. The margin is then widened until the
    mean of c over each outer pooling region falls outside the range of agent ideal points.
    """
    if p.orientation != DELEGATION:
        raise WrongOrientation("expected a delegation primitive")
    lo, hi = p.decision_domain
    if not lo < z0 < hi:
        raise ValueError(f"z0={z0} must lie inside the declared decision domain")
    xs = np.linspace(lo, hi, n)
    th = np.linspace(*p.state_domain, n_states)
    T, X = np.meshgrid(th, xs, indexing="ij")
    supV = p.principal.level(T, X, z0).max(axis=0)

    def sup_v(x):
        return float(np.max(p.principal.level(th, x, z0)))

    inside = supV >= -1e-12
    if inside[0] or inside[-1]:
        raise UnboundedV("principal payoff does not diverge on the declared decision domain")
    z_lo, z_hi = _outer_root(sup_v, supV, xs, "lo"), _outer_root(sup_v, supV, xs, "hi")
    t_lo, t_hi = p.state_domain
    u_lo = p.agent.level(t_lo, xs, z0) - p.agent.level(t_lo, z_hi, z0)
    u_hi = p.agent.level(t_hi, xs, z0) - p.agent.level(t_hi, z_lo, z0)
    if u_lo[0] >= 0 or u_hi[-1] >= 0:
        raise UnboundedV("agent payoff does not diverge on the declared decision domain")
    r_lo = _outer_root(lambda x: float(p.agent.level(t_lo, x, z0) - p.agent.level(t_lo, z_hi, z0)),
                       u_lo, xs, "lo")
    r_hi = _outer_root(lambda x: float(p.agent.level(t_hi, x, z0) - p.agent.level(t_hi, z_lo, z0)),
                       u_hi, xs, "hi")
    x_lo, x_hi = min(z_lo, r_lo), max(z_hi, r_hi)
    if p.linear is None:
        return BoundingInterval(x_lo, x_hi, (z_lo, z_hi), (x_lo, x_hi), 0.0, float(z0))
    c, b = p.linear.c, p.linear.b
    core_lo, core_hi = float(b(t_lo)), float(b.left_limit(t_hi))
    C = c.antiderivative()

    def mean(a, e):
        return float(C(e) - C(a)) / (e - a)

    margin, step = 0.0, 0.01 * (x_hi - x_lo)
    while True:
        y_lo, y_hi = x_lo - margin, x_hi + margin
        if y_lo < lo or y_hi > hi:
            raise UnboundedV("declared decision domain too narrow for the bounding margin")
        if mean(y_lo, x_hi) < core_lo and mean(x_lo, y_hi) > core_hi:
            return BoundingInterval(y_lo, y_hi, (z_lo, z_hi), (x_lo, x_hi), margin, float(z0))
        margin = step if margin == 0 else 2 * margin
