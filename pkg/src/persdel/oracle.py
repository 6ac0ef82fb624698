"""Exhaustive enumeration over grid-aligned monotone sets.

Every candidate is built from consecutive grid nodes. A cell between two nodes is
either separated (contained in the set) or part of a pooling gap. In the default
``full`` family an interior node between two pooled cells may itself belong to
the set, splitting the gap in two; the ``cells`` family always merges such runs.

Codes: the cell mask has bit ``i`` set when cell ``i`` is separated, and the
split mask has bit ``k - 1`` set when interior node ``k`` splits two pooled
cells. A cells-family code is the cell mask; a full-family code is
``cell_mask << (n - 1) | split_mask``. Among tied candidates the smallest code
wins, which prefers pooling over separation and then the fewest, leftmost splits.

Payoffs are additive over cells and gaps, so each segment is valued once and
candidate values are sums of table entries. Ties go to the smallest code.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import TieBreak, row_argmax, tau
from .domain import DELEGATION, PERSUASION, MonotoneSet, Primitive, QuantileDistribution
from .equivalence import delegation_to_persuasion, quantile_reparameterize, value_scale
from .errors import TooManyCells, WrongOrientation
from .poly import PiecewisePoly
from .valuation import NuFunction, _const_integral, _gap_integral, _moving_integral, expected_payoffs, expected_nu

MAX_CANDIDATES = 1 << 23
MAX_CELLS = 22
FAMILIES = ("full", "cells")
TIE = 1e-12


# ---------------------------------------------------------------------------
# grids and codes
# ---------------------------------------------------------------------------

def snap_grid(lo: float, hi: float, n: int, critical_points=()) -> np.ndarray:
    """Uniform grid with each declared interior point replacing its nearest interior node."""
    nodes = np.linspace(lo, hi, n + 1)
    taken: set[int] = set()
    for x in sorted(float(t) for t in critical_points):
        if not lo < x < hi or np.any(np.isclose(nodes, x, atol=1e-13)):
            continue
        k = int(np.argmin(np.abs(nodes[1:-1] - x))) + 1
        if k in taken:
            continue
        nodes[k] = x
        taken.add(k)
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("critical points too close together for this grid")
    return nodes


def _masks(code: int, n: int, family: str) -> tuple[int, int]:
    if family == "cells":
        if code >> n:
            raise ValueError("cells-family codes have n bits")
        return code, 0
    off = max(n - 1, 0)
    return code >> off, code & ((1 << off) - 1)


def segments(code: int, n: int, family: str = "full") -> tuple[list[int], list[tuple[int, int]]]:
    """Separated cell indices and pooling gaps (as node index pairs) of a code."""
    cells, splits = _masks(code, n, family)
    sep, gaps = [], []
    start = None
    for i in range(n):
        if (cells >> i) & 1:
            if start is not None:
                gaps.append((start, i))
                start = None
            sep.append(i)
        else:
            if start is not None and i > 0 and (splits >> (i - 1)) & 1:
                gaps.append((start, i))
                start = None
            if start is None:
                start = i
    if start is not None:
        gaps.append((start, n))
    return sep, gaps


def decode(code: int, nodes, family: str = "full") -> MonotoneSet:
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes) - 1
    sep, gaps = segments(code, n, family)
    ivs = [(nodes[i], nodes[i + 1]) for i in sep]
    ivs += [(nodes[k], nodes[k]) for g in gaps for k in g]
    return MonotoneSet(tuple(ivs), (float(nodes[0]), float(nodes[-1])))


def count_candidates(n: int, family: str = "full") -> int:
    if family == "cells":
        return 1 << n
    # ending with a separated cell / ending with a pooled cell, node at the end in the set
    es, ep = [1] + [0] * n, [0] * (n + 1)
    for k in range(1, n + 1):
        es[k] = es[k - 1] + ep[k - 1]
        ep[k] = sum(es[j] + ep[j] for j in range(k))
    return es[n] + ep[n]


# ---------------------------------------------------------------------------
# segment tables
# ---------------------------------------------------------------------------

@dataclass
class _Tables:
    sep: np.ndarray        # principal value of a separated cell
    gap: np.ndarray        # principal value of a gap spanning nodes i..j
    sep_agent: np.ndarray
    gap_agent: np.ndarray
    norm: float


def _primitive_tables(p: Primitive, nodes: np.ndarray, tb: TieBreak) -> _Tables:
    n = len(nodes) - 1
    sep, sep_a = np.zeros(n), np.zeros(n)
    gap, gap_a = np.full((n + 1, n + 1), np.nan), np.full((n + 1, n + 1), np.nan)
    s_lo, s_hi = p.state_domain
    if p.orientation == DELEGATION:
        T = tau(p.agent, nodes, s_lo, s_hi)
        T[0] = s_lo
        tail = _const_integral(p, nodes[-1], T[-1], s_hi)
        for i in range(n):
            t1 = s_hi if i == n - 1 else T[i + 1]
            sep[i], sep_a[i] = _moving_integral(p, T[i], t1, nodes[i], nodes[i + 1])
        for i in range(n):
            for j in range(i + 1, n + 1):
                gp, ga = _gap_integral(p, nodes[i], nodes[j], T[i], T[j], tb)
                if j == n:
                    gp, ga = gp + tail[0], ga + tail[1]
                gap[i, j], gap_a[i, j] = gp, ga
    else:
        x_lo, x_hi = p.decision_domain
        for i in range(n):
            sep[i], sep_a[i] = _moving_integral(p, nodes[i], nodes[i + 1], x_lo, x_hi)
        for i in range(n):
            for j in range(i + 1, n + 1):
                a, b = nodes[i], nodes[j]
                ar, pr = p.agent.theta_integral(a, b), p.principal.theta_integral(a, b)
                x = row_argmax(ar, pr, p.anchor, tb)
                gap[i, j] = pr.integral(p.anchor, x) if x >= p.anchor else -pr.integral(x, p.anchor)
                gap_a[i, j] = ar.integral(p.anchor, x) if x >= p.anchor else -ar.integral(x, p.anchor)
    return _Tables(sep, gap, sep_a, gap_a, s_hi - s_lo)


def _nu_tables(nu: NuFunction, c: PiecewisePoly, nodes: np.ndarray) -> _Tables:
    n = len(nodes) - 1
    nc = nu.over(float(c(c.lo)), float(c.left_limit(c.hi))).compose(c)
    sep = np.array([nc.integral(nodes[i], nodes[i + 1]) for i in range(n)])
    gap = np.full((n + 1, n + 1), np.nan)
    for i in range(n):
        for j in range(i + 1, n + 1):
            a, b = nodes[i], nodes[j]
            gap[i, j] = (b - a) * float(nu(c.integral(a, b) / (b - a)))
    return _Tables(sep, gap, np.zeros(n), np.zeros_like(gap), c.hi - c.lo)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _enumerate(tab: _Tables, n: int, family: str):
    """All candidate (principal, agent, code) arrays, built cell by cell from the left."""
    empty = (np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))
    es = [empty] * (n + 1)
    ep = [empty] * (n + 1)
    es[0] = (np.zeros(1), np.zeros(1), np.zeros(1, dtype=np.int64))

    def cat(parts):
        parts = [q for q in parts if len(q[0])]
        if not parts:
            return empty
        return tuple(np.concatenate([q[k] for q in parts]) for k in range(3))

    off = n - 1 if family == "full" else 0
    for k in range(1, n + 1):
        v, a, c = cat([es[k - 1], ep[k - 1]])
        es[k] = (v + tab.sep[k - 1], a + tab.sep_agent[k - 1], c | np.int64(1 << (off + k - 1)))
        parts = []
        for j in range(k):
            g, ga = tab.gap[j, k], tab.gap_agent[j, k]
            v, a, c = es[j]
            parts.append((v + g, a + ga, c))
            if family == "full" and j > 0:
                v, a, c = ep[j]
                parts.append((v + g, a + ga, c | np.int64(1 << (j - 1))))
        ep[k] = cat(parts)
    return cat([es[n], ep[n]])


@dataclass
class OracleResult:
    best: MonotoneSet
    value: float
    agent_value: float
    code: int
    n: int
    family: str
    mode: str
    nodes: np.ndarray
    candidates: int
    ranked: list = field(default_factory=list)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_list(),
            "best_str": self.best.describe(),
            "value": self.value,
            "agent_value": self.agent_value,
            "code": self.code,
            "n": self.n,
            "family": self.family,
            "mode": self.mode,
            "nodes": [float(x) for x in self.nodes],
            "candidates": self.candidates,
            "ranked": [{"code": c, "value": v, "set": s.to_list()} for c, v, s in self.ranked],
            "seed": self.seed,
        }


def enumerate_optimum(problem, n: int, tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED, mode: str | None = None,
                      family: str = "full", critical_points=(), top_k: int = 10,
                      seed: int | None = None) -> OracleResult:
    """Best grid-aligned set for a primitive or for a (nu, c[, F]) triple.

    ``mode`` defaults to the primitive's orientation, or "linear" for a nu triple.
    ``seed`` is only recorded; enumeration itself is deterministic.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if n < 1 or n > MAX_CELLS:
        raise TooManyCells(f"n={n} outside 1..{MAX_CELLS}")
    total = count_candidates(n, family)
    if total > MAX_CANDIDATES:
        raise TooManyCells(f"{total} candidates for n={n} in the {family} family exceeds {MAX_CANDIDATES}")
    if isinstance(problem, Primitive):
        p = problem
        if p.state_dist is not None and not p.state_dist.is_uniform:
            p = quantile_reparameterize(p)
        if mode is not None and mode != p.orientation:
            raise WrongOrientation(f"primitive is a {p.orientation} problem, not {mode}")
        mode = p.orientation
        dom = p.decision_domain if mode == DELEGATION else p.state_domain
        nodes = snap_grid(*dom, n, critical_points)
        tab = _primitive_tables(p, nodes, tb)
    else:
        nu, c, *rest = problem
        F = rest[0] if rest else None
        if F is not None and not F.is_uniform:
            c = c.compose(F.quantile)
        mode = "linear"
        nodes = snap_grid(c.lo, c.hi, n, critical_points)
        tab = _nu_tables(nu, c, nodes)
    vals, avals, codes = _enumerate(tab, n, family)
    vals, avals = vals / tab.norm, avals / tab.norm
    top = vals.max()
    tied = np.flatnonzero(vals >= top - TIE)
    i = int(tied[np.argmin(codes[tied])])
    k = min(top_k, len(vals))
    idx = np.argpartition(-vals, k - 1)[:k] if k < len(vals) else np.arange(len(vals))
    order = sorted(idx, key=lambda j: (-round(vals[j], 12), codes[j]))
    ranked = [(int(codes[j]), float(vals[j]), decode(int(codes[j]), nodes, family)) for j in order]
    return OracleResult(decode(int(codes[i]), nodes, family), float(vals[i]), float(avals[i]), int(codes[i]),
                        n, family, mode, nodes, len(vals), ranked, seed)


# ---------------------------------------------------------------------------
# equivalence battery
# ---------------------------------------------------------------------------

def random_set(rng: np.random.Generator, nodes, family: str = "full") -> tuple[int, MonotoneSet]:
    n = len(nodes) - 1
    code = int(rng.integers(0, 1 << n))
    if family == "full" and n > 1:
        code = code << (n - 1) | int(rng.integers(0, 1 << (n - 1)))
    return code, decode(code, nodes, family)


def code_value(tab: _Tables, code: int, n: int, family: str = "full") -> tuple[float, float]:
    """Normalized (principal, agent) value of a code from segment tables."""
    sep, gaps = segments(code, n, family)
    P = sum(tab.sep[i] for i in sep) + sum(tab.gap[i, j] for i, j in gaps)
    A = sum(tab.sep_agent[i] for i in sep) + sum(tab.gap_agent[i, j] for i, j in gaps)
    return float(P) / tab.norm, float(A) / tab.norm


@dataclass
class BatteryReport:
    trials: int
    seed: int
    max_gap_principal: float
    max_gap_agent: float
    tol: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"trials": self.trials, "seed": self.seed, "max_gap_principal": self.max_gap_principal,
                "max_gap_agent": self.max_gap_agent, "tol": self.tol, "passed": self.passed,
                "violations": [{"set": s, "gap_principal": gp, "gap_agent": ga} for s, gp, ga in self.violations]}


def equivalence_battery(pD: Primitive, trials: int = 200, seed: int = 0, n: int = 12, tol: float = 1e-7,
                        tb: TieBreak = TieBreak.PRINCIPAL_PREFERRED, pP: Primitive | None = None,
                        direct: int = 10) -> BatteryReport:
    """Compare delegation and persuasion values of random grid sets.

    The first ``direct`` sets go through ``expected_payoffs`` on both sides; the rest are
    summed from per-segment tables, which hold the same exact segment integrals.
    ``pP`` overrides the transformed primitive, which is how a negative control is run.
    """
    if pD.orientation != DELEGATION:
        raise WrongOrientation("expected a delegation primitive")
    if pD.state_dist is not None and not pD.state_dist.is_uniform:
        pD = quantile_reparameterize(pD)
    pP = delegation_to_persuasion(pD) if pP is None else pP
    if pP.orientation != PERSUASION:
        raise WrongOrientation("pP must be a persuasion primitive")
    scale = value_scale(pD)
    rng = np.random.default_rng(seed)
    nodes = np.linspace(*pD.decision_domain, n + 1)
    tD = _primitive_tables(pD, nodes, tb)
    tP = _primitive_tables(pP, nodes, tb)
    gp_max = ga_max = 0.0
    bad = []
    for t in range(trials):
        code, S = random_set(rng, nodes)
        if t < direct:
            vd, vp = expected_payoffs(pD, S, tb), expected_payoffs(pP, S, tb)
            d, q = (vd.principal, vd.agent), (vp.principal, vp.agent)
        else:
            d, q = code_value(tD, code, n), code_value(tP, code, n)
        gp = abs(d[0] * scale - q[0])
        ga = abs(d[1] * scale - q[1])
        gp_max, ga_max = max(gp_max, gp), max(ga_max, ga)
        if gp > tol or ga > tol:
            bad.append((S.to_list(), gp, ga))
    return BatteryReport(trials, seed, gp_max, ga_max, tol, bad)


def random_linear_delegation(rng: np.random.Generator, pieces: int = 3) -> Primitive:
    """Random linear delegation primitive on [0, 1] x [0, 1] with piecewise-affine b, c, d."""
    from .domain import make_linear_primitive

    def increasing(k):
        ys = np.cumsum(rng.uniform(0.2, 1.0, k + 1))
        ys = (ys - ys[0]) / (ys[-1] - ys[0])
        xs = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, k - 1)), [1.0]])
        return PiecewisePoly.linear_interp(xs, ys)

    b = increasing(pieces) + float(rng.uniform(-0.2, 0.2))
    c = increasing(pieces)
    d = PiecewisePoly.linear_interp(np.linspace(0, 1, pieces + 1), rng.uniform(-0.3, 1.3, pieces + 1))
    return make_linear_primitive(b, c, d, name="random-linear")


__all__ = ["snap_grid", "segments", "decode", "code_value", "count_candidates", "OracleResult", "enumerate_optimum", "random_set",
           "BatteryReport", "equivalence_battery", "random_linear_delegation", "MAX_CANDIDATES", "FAMILIES"]
