"""Value types: state distributions, monotone sets, marginal-payoff fields, primitives."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainMismatch, NonMonotone, OutOfDomain
from .poly import PiecewisePoly

DELEGATION = "delegation"
PERSUASION = "persuasion"
ORIENTATIONS = (DELEGATION, PERSUASION)

Interval = tuple[float, float]


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuantileDistribution:
    """State distribution described by its quantile function.

    Flats of the quantile are atoms of the distribution, jumps are gaps with zero density.
    ``quantile`` may be ``None`` when only a density is known and the inverse cdf
    is not polynomial; ``ppf`` then inverts the cdf numerically.
    """

    quantile: PiecewisePoly | None
    density: PiecewisePoly | None = None
    support: Interval = (0.0, 1.0)

    def __post_init__(self):
        if self.quantile is None and self.density is None:
            raise ValueError("need a quantile function or a density")
        if self.quantile is not None:
            q = self.quantile
            if abs(q.lo) > 1e-12 or abs(q.hi - 1) > 1e-12:
                raise DomainMismatch("quantile must be defined on [0, 1]")
            pts = q.sample_points(1025)
            vals = q(pts)
            if np.any(np.diff(vals) < -1e-12) or np.any(q.jumps() < -1e-12):
                raise NonMonotone("quantile function must be nondecreasing")
            lo, hi = float(q(0.0)), float(q.left_limit(1.0))
            object.__setattr__(self, "support", (lo, hi))
        if self.density is not None:
            f = self.density
            if self.quantile is None:
                object.__setattr__(self, "support", f.domain)
            grid = np.linspace(f.lo, f.hi, 1024)
            vals = f(grid)
            if np.any(vals < -1e-12):
                raise ValueError("density must be nonnegative")
            if np.any(vals[1:-1] <= 0):
                warnings.warn("density vanishes inside its support", stacklevel=2)
            if not f.is_continuous(1e-9):
                warnings.warn("density is discontinuous", stacklevel=2)
            total = f.integral()
            if abs(total - 1.0) > 1e-10:
                raise ValueError(f"density integrates to {total}, not 1")

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "QuantileDistribution":
        return cls(PiecewisePoly.polynomial([lo, hi - lo], 0.0, 1.0),
                   PiecewisePoly.constant(1.0 / (hi - lo), lo, hi))

    @classmethod
    def from_density(cls, f: PiecewisePoly, normalize: bool = False) -> "QuantileDistribution":
        if normalize:
            f = f * (1.0 / f.integral())
        q = None
        if f.degree == 0:
            cdf = f.antiderivative()
            if np.all(f.coeffs[:, 0] > 0):
                q = cdf.inverse()
        return cls(q, f)

    @classmethod
    def discrete(cls, points: Sequence[float], probs: Sequence[float]) -> "QuantileDistribution":
        cum = np.concatenate([[0.0], np.cumsum(probs)])
        if abs(cum[-1] - 1) > 1e-12:
            raise ValueError("probabilities must sum to one")
        cum[-1] = 1.0
        return cls(PiecewisePoly(cum, [[p] for p in points]))

    @property
    def is_uniform(self) -> bool:
        if self.density is not None:
            return self.density.degree == 0 and np.allclose(self.density.coeffs[:, 0], self.density.coeffs[0, 0])
        return self.quantile.degree <= 1 and self.quantile.npieces == 1

    def ppf(self, theta):
        if self.quantile is not None:
            return self.quantile(theta)
        return self._cdf_poly().invert_values(theta)

    def _cdf_poly(self) -> PiecewisePoly:
        return self.density.antiderivative()

    def cdf(self, omega):
        lo, hi = self.support
        w = np.clip(np.asarray(omega, dtype=float), lo, hi)
        if self.density is not None:
            out = self._cdf_poly()(w)
        else:
            # F(w) = sup{t : Q(t) <= w}
            q = self.quantile
            a = np.zeros(w.shape)
            b = np.ones(w.shape)
            for _ in range(80):
                mid = 0.5 * (a + b)
                ok = q(mid) <= w
                a = np.where(ok, mid, a)
                b = np.where(ok, b, mid)
            out = a
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        if self.quantile is not None:
            return self.quantile.integral()
        return (self.density * PiecewisePoly.identity(*self.density.domain)).integral()

    def mode(self) -> float:
        """Location of the density maximum (breakpoints and stationary points are candidates)."""
        if self.density is None:
            raise ValueError("mode requires a density")
        f = self.density
        cands = list(f.breaks) + list(f.derivative().roots(0.0))
        cands = np.asarray(cands)
        vals = np.maximum(f(cands), f.left_limit(cands))
        return float(cands[int(np.argmax(vals))])

    def atoms(self) -> list[tuple[float, float]]:
        """(location, probability) for each flat piece of the quantile."""
        if self.quantile is None:
            return []
        out = []
        q = self.quantile
        for i in range(q.npieces):
            c = q.piece(i)
            if len(c) == 1:
                out.append((float(c[0]), float(q.breaks[i + 1] - q.breaks[i])))
        return out

    def to_dict(self) -> dict:
        d: dict = {}
        if self.quantile is not None:
            d["quantile"] = self.quantile.to_dict()
        if self.density is not None:
            d["density"] = self.density.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileDistribution":
        q = PiecewisePoly.from_dict(d["quantile"]) if "quantile" in d else None
        f = PiecewisePoly.from_dict(d["density"]) if "density" in d else None
        return cls(q, f)


# ---------------------------------------------------------------------------
# monotone sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneSet:
    """A closed subset of ``domain`` stored as sorted disjoint closed intervals.

    As a delegation set it lists permitted decisions; as a partition it lists the
    separated states, and each gap between consecutive intervals is a pooling interval.
    """

    intervals: tuple[Interval, ...]
    domain: Interval = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = self.domain
        ivs = sorted((float(a), float(b)) for a, b in self.intervals)
        merged: list[list[float]] = []
        for a, b in ivs:
            if b < a:
                raise ValueError(f"bad interval [{a}, {b}]")
            if a < lo - 1e-12 or b > hi + 1e-12:
                raise OutOfDomain(f"interval [{a}, {b}] outside {self.domain}")
            a, b = max(a, lo), min(b, hi)
            if merged and a <= merged[-1][1] + 1e-14:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        if not merged:
            raise ValueError("a monotone set must be nonempty")
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    @classmethod
    def from_points(cls, points: Iterable[float], domain: Interval = (0.0, 1.0)) -> "MonotoneSet":
        return cls(tuple((p, p) for p in points), domain)

    @classmethod
    def full(cls, domain: Interval = (0.0, 1.0)) -> "MonotoneSet":
        return cls((domain,), domain)

    @classmethod
    def trivial(cls, domain: Interval = (0.0, 1.0)) -> "MonotoneSet":
        return cls.from_points(domain, domain)

    @classmethod
    def parse(cls, spec, domain: Interval = (0.0, 1.0)) -> "MonotoneSet":
        """Accept numbers (points) and two-element lists (intervals)."""
        ivs = []
        for item in spec:
            if isinstance(item, (int, float)):
                ivs.append((item, item))
            else:
                a, b = item
                ivs.append((a, b))
        return cls(tuple(ivs), domain)

    @property
    def balanced(self) -> bool:
        lo, hi = self.domain
        return self.intervals[0][0] <= lo + 1e-14 and self.intervals[-1][1] >= hi - 1e-14

    def contains(self, x: float) -> bool:
        return any(a - 1e-14 <= x <= b + 1e-14 for a, b in self.intervals)

    def pools(self) -> list[Interval]:
        """Pooling intervals [right end of one component, left end of the next)."""
        return [(self.intervals[k][1], self.intervals[k + 1][0]) for k in range(len(self.intervals) - 1)]

    def separated(self) -> list[Interval]:
        return [(a, b) for a, b in self.intervals if b > a]

    def points(self) -> list[float]:
        return [a for a, b in self.intervals if a == b]

    def element(self, theta: float):
        """Partition element of ``theta``: ``("point", theta)`` or ``("pool", lo, hi)``."""
        lo, hi = self.domain
        if theta < lo - 1e-14 or theta > hi + 1e-14:
            raise OutOfDomain(f"state {theta} outside {self.domain}")
        if theta >= hi:
            return ("point", hi)
        for a, b in self.intervals:
            if a <= theta < b:
                return ("point", theta)
        for a, b in self.pools():
            if a <= theta < b:
                return ("pool", a, b)
        # only reachable for an unbalanced set; treat the outside as one pool
        first, last = self.intervals[0][0], self.intervals[-1][1]
        if theta < first:
            return ("pool", lo, first)
        return ("pool", last, hi)

    def to_list(self) -> list:
        return [a if a == b else [a, b] for a, b in self.intervals]

    def describe(self) -> str:
        parts = [f"{{{a:g}}}" if a == b else f"[{a:g}, {b:g}]" for a, b in self.intervals]
        return " U ".join(parts)


# ---------------------------------------------------------------------------
# marginal payoff fields
# ---------------------------------------------------------------------------

def _pl_weights(nodes: np.ndarray, a: float, b: float) -> np.ndarray:
    """Weights w with  integral_a^b interp(nodes, v)(t) dt = w @ v  for piecewise-linear interpolation."""
    w = np.zeros(len(nodes))
    if b <= a:
        return w
    for i in range(len(nodes) - 1):
        l, r = nodes[i], nodes[i + 1]
        s, e = max(a, l), min(b, r)
        if e <= s:
            continue
        h = r - l
        # integral of (r - t)/h and (t - l)/h over [s, e]
        w[i] += ((r - s) ** 2 - (r - e) ** 2) / (2 * h)
        w[i + 1] += ((e - l) ** 2 - (s - l) ** 2) / (2 * h)
    return w


class SeparableField:
    """A marginal payoff  u(theta, x) = sum_k g_k(theta) * h_k(x)."""

    def __init__(self, terms: Sequence[tuple[PiecewisePoly, PiecewisePoly]]):
        if not terms:
            raise ValueError("need at least one term")
        sd = terms[0][0].domain
        dd = terms[0][1].domain
        for g, h in terms:
            if not (np.allclose(g.domain, sd) and np.allclose(h.domain, dd)):
                raise DomainMismatch("all terms must share state and decision domains")
        self.terms = tuple(terms)
        self.state_domain = (float(sd[0]), float(sd[1]))
        self.decision_domain = (float(dd[0]), float(dd[1]))
        self._H = [h.antiderivative() for _, h in terms]
        self._G = [g.antiderivative() for g, _ in terms]

    def eval(self, theta, x):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        out = sum(g(theta) * h(x) for g, h in self.terms)
        return out

    def level(self, theta, x, anchor: float):
        """integral_anchor^x u(theta, s) ds."""
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        return sum(g(theta) * (H(x) - H(anchor)) for (g, _), H in zip(self.terms, self._H))

    def row(self, theta: float) -> PiecewisePoly:
        out = None
        for g, h in self.terms:
            t = h * float(g(theta))
            out = t if out is None else out + t
        return out

    def column(self, x: float) -> PiecewisePoly:
        """theta -> u(theta, x)."""
        out = None
        for g, h in self.terms:
            t = g * float(h(x))
            out = t if out is None else out + t
        return out

    def level_column(self, x: float, anchor: float) -> PiecewisePoly:
        """theta -> integral_anchor^x u(theta, s) ds."""
        out = None
        for (g, _), H in zip(self.terms, self._H):
            t = g * float(H(x) - H(anchor))
            out = t if out is None else out + t
        return out

    def theta_integral(self, a: float, b: float) -> PiecewisePoly:
        """x -> integral_a^b u(theta, x) dtheta."""
        out = None
        for (g, h), G in zip(self.terms, self._G):
            w = float(G.left_limit(b) - G(a)) if b > a else 0.0
            t = h * w
            out = t if out is None else out + t
        return out

    @property
    def state_breaks(self) -> np.ndarray:
        return np.unique(np.concatenate([g.breaks for g, _ in self.terms]))

    @property
    def decision_breaks(self) -> np.ndarray:
        return np.unique(np.concatenate([h.breaks for _, h in self.terms]))

    def transposed(self) -> "SeparableField":
        """The field (theta, x) -> -u(x, theta)."""
        return SeparableField([(h, -g) for g, h in self.terms])

    def compose_state(self, q: PiecewisePoly) -> "SeparableField":
        return SeparableField([(g.compose(q), h) for g, h in self.terms])

    def to_dict(self) -> dict:
        return {"terms": [[g.to_dict(), h.to_dict()] for g, h in self.terms]}


class GridField:
    """A marginal payoff tabulated on a rectangular grid, bilinearly interpolated."""

    def __init__(self, thetas: Sequence[float], xs: Sequence[float], values):
        self.thetas = np.asarray(thetas, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (len(self.thetas), len(self.xs)):
            raise ValueError("values must have shape (len(thetas), len(xs))")
        self.state_domain = (float(self.thetas[0]), float(self.thetas[-1]))
        self.decision_domain = (float(self.xs[0]), float(self.xs[-1]))
        dx = np.diff(self.xs)
        # cumulative integral of each row at the x nodes (exact for linear rows)
        self._cum = np.concatenate(
            [np.zeros((len(self.thetas), 1)),
             np.cumsum(0.5 * (self.values[:, 1:] + self.values[:, :-1]) * dx, axis=1)], axis=1)

    @classmethod
    def from_function(cls, fn, state_domain: Interval = (0.0, 1.0), decision_domain: Interval = (0.0, 1.0),
                      n: int = 257) -> "GridField":
        th = np.linspace(*state_domain, n)
        xs = np.linspace(*decision_domain, n)
        T, X = np.meshgrid(th, xs, indexing="ij")
        return cls(th, xs, fn(T, X))

    def _loc(self, nodes: np.ndarray, v: np.ndarray):
        i = np.clip(np.searchsorted(nodes, v, side="right") - 1, 0, len(nodes) - 2)
        w = (v - nodes[i]) / (nodes[i + 1] - nodes[i])
        return i, w

    def eval(self, theta, x):
        theta, x = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(x, dtype=float))
        i, wt = self._loc(self.thetas, theta)
        j, wx = self._loc(self.xs, x)
        v = self.values
        return ((1 - wt) * ((1 - wx) * v[i, j] + wx * v[i, j + 1])
                + wt * ((1 - wx) * v[i + 1, j] + wx * v[i + 1, j + 1]))

    def _row_level(self, i, x):
        j, wx = self._loc(self.xs, x)
        h = self.xs[j + 1] - self.xs[j]
        v0 = self.values[i, j]
        v1 = self.values[i, j + 1]
        t = wx * h
        return self._cum[i, j] + v0 * t + (v1 - v0) * t * t / (2 * h)

    def level(self, theta, x, anchor: float):
        theta, x = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(x, dtype=float))
        i, wt = self._loc(self.thetas, theta)
        anc = np.full(x.shape, float(anchor))
        lx = (1 - wt) * self._row_level(i, x) + wt * self._row_level(i + 1, x)
        la = (1 - wt) * self._row_level(i, anc) + wt * self._row_level(i + 1, anc)
        return lx - la

    def row(self, theta: float) -> PiecewisePoly:
        i, wt = self._loc(self.thetas, np.asarray(float(theta)))
        vals = (1 - wt) * self.values[i] + wt * self.values[i + 1]
        return PiecewisePoly.linear_interp(self.xs, vals)

    def column(self, x: float) -> PiecewisePoly:
        j, wx = self._loc(self.xs, np.asarray(float(x)))
        return PiecewisePoly.linear_interp(self.thetas, (1 - wx) * self.values[:, j] + wx * self.values[:, j + 1])

    def level_column(self, x: float, anchor: float) -> PiecewisePoly:
        idx = np.arange(len(self.thetas))
        lx = self._row_level(idx, np.full(len(idx), float(x)))
        la = self._row_level(idx, np.full(len(idx), float(anchor)))
        return PiecewisePoly.linear_interp(self.thetas, lx - la)

    def theta_integral(self, a: float, b: float) -> PiecewisePoly:
        w = _pl_weights(self.thetas, a, b)
        return PiecewisePoly.linear_interp(self.xs, w @ self.values)

    @property
    def state_breaks(self) -> np.ndarray:
        return self.thetas

    @property
    def decision_breaks(self) -> np.ndarray:
        return self.xs

    def transposed(self) -> "GridField":
        return GridField(self.xs, self.thetas, -self.values.T)

    def compose_state(self, q: PiecewisePoly) -> "GridField":
        th = np.linspace(q.lo, q.hi, len(self.thetas))
        mapped = q(th)
        i, wt = self._loc(self.thetas, mapped)
        vals = (1 - wt)[:, None] * self.values[i] + wt[:, None] * self.values[i + 1]
        return GridField(th, self.xs, vals)

    def to_dict(self) -> dict:
        return {"thetas": self.thetas.tolist(), "xs": self.xs.tolist(), "values": self.values.tolist()}


Field = Union[SeparableField, GridField]


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearForm:
    b: PiecewisePoly
    c: PiecewisePoly
    d: PiecewisePoly


@dataclass(frozen=True, eq=False)
class Primitive:
    """Marginal payoffs of agent (dU/dx) and principal (dV/dx) plus orientation.

    Payoff levels are always the normalized ones: anchored at the top decision for
    delegation and at the bottom decision for persuasion.
    """

    orientation: str
    agent: Field
    principal: Field
    state_dist: QuantileDistribution | None = None
    linear: LinearForm | None = None
    name: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        if not (np.allclose(self.agent.state_domain, self.principal.state_domain)
                and np.allclose(self.agent.decision_domain, self.principal.decision_domain)):
            raise DomainMismatch("agent and principal fields must share domains")

    @property
    def kind(self) -> str:
        if self.linear is not None:
            return "linear"
        return "tabulated" if isinstance(self.agent, GridField) else "separable"

    @property
    def state_domain(self) -> Interval:
        return self.agent.state_domain

    @property
    def decision_domain(self) -> Interval:
        return self.agent.decision_domain

    @property
    def anchor(self) -> float:
        lo, hi = self.decision_domain
        return hi if self.orientation == DELEGATION else lo

    def agent_level(self, theta, x):
        return self.agent.level(theta, x, self.anchor)

    def principal_level(self, theta, x):
        return self.principal.level(theta, x, self.anchor)

    def with_name(self, name: str) -> "Primitive":
        return Primitive(self.orientation, self.agent, self.principal, self.state_dist, self.linear, name,
                         self.warnings)


def check_monotone_field(u: Field, n: int = 64, tol: float = 1e-12) -> list[str]:
    """(A2)-style checks on an n x n grid: nondecreasing in theta, nonincreasing in x."""
    th = np.linspace(*u.state_domain, n)
    xs = np.linspace(*u.decision_domain, n)
    T, X = np.meshgrid(th, xs, indexing="ij")
    v = u.eval(T, X)
    issues = []
    dt = np.diff(v, axis=0)
    dx = np.diff(v, axis=1)
    if np.any(dt < -tol):
        issues.append("marginal decreases in the state somewhere")
    elif np.any(dt <= tol):
        issues.append("marginal only weakly increasing in the state")
    if np.any(dx > tol):
        issues.append("marginal increases in the decision somewhere")
    elif np.any(dx >= -tol):
        issues.append("marginal only weakly decreasing in the decision")
    return issues


def _strictly_increasing(p: PiecewisePoly, tol: float = 1e-12) -> bool:
    pts = p.sample_points(257)
    vals = p(pts)
    if np.any(np.diff(vals) <= 0) and np.any(np.diff(vals) < -tol):
        return False
    if np.any(np.diff(vals) <= 0):
        return False
    if np.any(p.jumps() < -tol):
        return False
    dp = p.derivative()
    return bool(np.all(dp(pts) >= -tol) and np.all(dp.left_limit(pts[1:]) >= -tol))


def _one(domain: Interval) -> PiecewisePoly:
    return PiecewisePoly.constant(1.0, *domain)


def make_linear_primitive(b: PiecewisePoly, c: PiecewisePoly, d: PiecewisePoly, orientation: str = DELEGATION,
                          state_dist: QuantileDistribution | None = None, name: str = "") -> Primitive:
    """Linear primitive.

    Delegation:  dU/dx = b(theta) - c(x),  dV/dx = d(theta) - c(x)
    Persuasion:  dU/dx = c(theta) - b(x),  dV/dx = c(theta) - d(x)
    """
    for fn, label in ((b, "b"), (c, "c")):
        if not _strictly_increasing(fn):
            raise NonMonotone(f"{label} must be strictly increasing")
    notes = []
    if not d.is_continuous():
        notes.append("d is discontinuous")
    if orientation == DELEGATION:
        if not np.allclose(b.domain, d.domain):
            raise DomainMismatch("b and d must share the state domain")
        sd, dd = b.domain, c.domain
        agent = SeparableField([(b, _one(dd)), (_one(sd), -c)])
        principal = SeparableField([(d, _one(dd)), (_one(sd), -c)])
    elif orientation == PERSUASION:
        if not np.allclose(b.domain, d.domain):
            raise DomainMismatch("b and d must share the decision domain")
        sd, dd = c.domain, b.domain
        agent = SeparableField([(c, _one(dd)), (_one(sd), -b)])
        principal = SeparableField([(c, _one(dd)), (_one(sd), -d)])
    else:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    if state_dist is not None and not np.allclose(state_dist.support, sd):
        raise DomainMismatch("state distribution support differs from the state domain")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return Primitive(orientation, agent, principal, state_dist, LinearForm(b, c, d), name, tuple(notes))


def make_primitive(agent: Field, principal: Field, orientation: str,
                   state_dist: QuantileDistribution | None = None, name: str = "",
                   validate: bool = True) -> Primitive:
    """General (separable or tabulated) primitive; monotonicity problems become warnings."""
    notes: list[str] = []
    if validate:
        notes = check_monotone_field(agent)
        for msg in notes:
            warnings.warn(msg, stacklevel=2)
    return Primitive(orientation, agent, principal, state_dist, None, name, tuple(notes))
