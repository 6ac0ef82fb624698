"""Scenario files: schema, canonical form, conversion to primitives, bundled examples."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .agent import TieBreak
from .domain import (DELEGATION, PERSUASION, GridField, MonotoneSet, Primitive, QuantileDistribution,
                     SeparableField, make_linear_primitive, make_primitive)
from .poly import PiecewisePoly
from .valuation import NuFunction, build_nu, ms1991_nu, regulation_nu


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PolyModel(_Model):
    breaks: list[float]
    coeffs: list[list[float]]

    def build(self) -> PiecewisePoly:
        return PiecewisePoly(self.breaks, self.coeffs)

    @classmethod
    def of(cls, p: PiecewisePoly) -> "PolyModel":
        return cls(**p.to_dict())


class GridModel(_Model):
    thetas: list[float]
    xs: list[float]
    values: list[list[float]]


class LinearSpec(_Model):
    kind: Literal["linear"] = "linear"
    b: PolyModel
    c: PolyModel
    d: PolyModel


class SeparableSpec(_Model):
    kind: Literal["separable"] = "separable"
    agent: list[tuple[PolyModel, PolyModel]]
    principal: list[tuple[PolyModel, PolyModel]]


class TabulatedSpec(_Model):
    kind: Literal["tabulated"] = "tabulated"
    agent: GridModel
    principal: GridModel


PrimitiveSpec = Annotated[Union[LinearSpec, SeparableSpec, TabulatedSpec], Field(discriminator="kind")]


class DistributionSpec(_Model):
    kind: Literal["uniform", "density", "quantile", "discrete"]
    lo: float = 0.0
    hi: float = 1.0
    density: Optional[PolyModel] = None
    quantile: Optional[PolyModel] = None
    points: Optional[list[float]] = None
    probs: Optional[list[float]] = None


class RegulationSpec(_Model):
    density: PolyModel
    theta_bar: float = 1.0


class NuSpec(_Model):
    kind: Literal["ms1991", "regulation"]
    k: Optional[float] = None
    density: Optional[PolyModel] = None
    theta_bar: float = 1.0
    c_domain: Optional[tuple[float, float]] = None


class Scenario(_Model):
    name: str
    description: str = ""
    orientation: Literal["delegation", "persuasion"] = DELEGATION
    primitive: Optional[PrimitiveSpec] = None
    state_distribution: Optional[DistributionSpec] = None
    anchors: Optional[dict[str, float]] = None
    critical_points: list[float] = []
    candidate: Optional[list[Union[float, tuple[float, float]]]] = None
    regulation: Optional[RegulationSpec] = None
    nu: Optional[NuSpec] = None
    tie_break: TieBreak = TieBreak.PRINCIPAL_PREFERRED


# ---------------------------------------------------------------------------
# (de)serialization
# ---------------------------------------------------------------------------

def canonical_json(s: Scenario) -> str:
    return json.dumps(s.model_dump(mode="json"), sort_keys=True, separators=(",", ":"), allow_nan=False)


def load_scenario(src) -> Scenario:
    """Scenario from a model, a dict, a JSON string, a file path, or a bundled name."""
    if isinstance(src, Scenario):
        return src
    if isinstance(src, dict):
        return Scenario.model_validate(src)
    text = str(src)
    if text in BUNDLED:
        return BUNDLED[text]()
    if not text.lstrip().startswith("{"):
        text = Path(text).read_text()
    return Scenario.model_validate_json(text)


# ---------------------------------------------------------------------------
# conversion
# ---------------------------------------------------------------------------

def to_distribution(spec: DistributionSpec | None) -> QuantileDistribution | None:
    if spec is None:
        return None
    if spec.kind == "uniform":
        return QuantileDistribution.uniform(spec.lo, spec.hi)
    if spec.kind == "discrete":
        return QuantileDistribution.discrete(spec.points, spec.probs)
    if spec.kind == "quantile":
        f = spec.density.build() if spec.density is not None else None
        return QuantileDistribution(spec.quantile.build(), f)
    return QuantileDistribution.from_density(spec.density.build())


def _field(terms) -> SeparableField:
    return SeparableField([(g.build(), h.build()) for g, h in terms])


def to_primitive(s: Scenario, validate: bool = True) -> Primitive:
    spec = s.primitive
    if spec is None:
        raise ValueError(f"scenario {s.name!r} has no primitive")
    F = to_distribution(s.state_distribution)
    if spec.kind == "linear":
        return make_linear_primitive(spec.b.build(), spec.c.build(), spec.d.build(), s.orientation, F, s.name)
    if spec.kind == "separable":
        agent, principal = _field(spec.agent), _field(spec.principal)
    else:
        agent = GridField(spec.agent.thetas, spec.agent.xs, spec.agent.values)
        principal = GridField(spec.principal.thetas, spec.principal.xs, spec.principal.values)
    return make_primitive(agent, principal, s.orientation, F, s.name, validate=validate)


def to_set(items, domain) -> MonotoneSet:
    return MonotoneSet.parse(items, tuple(domain))


def set_domain(p: Primitive) -> tuple[float, float]:
    return p.decision_domain if p.orientation == DELEGATION else p.state_domain


def nu_problem(s: Scenario) -> tuple[NuFunction, PiecewisePoly, QuantileDistribution | None]:
    """(nu, c, F) of a linear scenario."""
    if s.nu is not None:
        spec = s.nu
        if spec.kind == "ms1991":
            dom = spec.c_domain or (-2.0, 3.0)
            return ms1991_nu(spec.k), PiecewisePoly.identity(*dom), None
        dom = spec.c_domain or (0.0, spec.theta_bar)
        return regulation_nu(spec.density.build(), spec.theta_bar), PiecewisePoly.identity(*dom), None
    if s.regulation is not None:
        tb = s.regulation.theta_bar
        return regulation_nu(s.regulation.density.build(), tb), PiecewisePoly.identity(0.0, tb), None
    p = to_primitive(s)
    if p.linear is None:
        raise ValueError("solve-linear needs a linear primitive or a nu specification")
    nu = build_nu(p)
    L = p.linear
    if p.orientation == DELEGATION:
        return nu, L.c, None
    return nu, L.c, p.state_dist


# ---------------------------------------------------------------------------
# densities and bundled scenarios
# ---------------------------------------------------------------------------

def triangular_density(mode: float = 0.5) -> PiecewisePoly:
    return PiecewisePoly([0.0, mode, 1.0], [[0.0, 2.0 / mode], [2.0, -2.0 / (1.0 - mode)]])


def quadratic_density(mode: float, floor: float = 0.1) -> PiecewisePoly:
    """Continuous unimodal density: a concave quadratic bump on each side of ``mode`` over a floor."""
    left = [floor, 2.0 / mode, -1.0 / mode ** 2]  # floor + 1 - ((x - mode)/mode)^2 at local x
    r = 1.0 - mode
    right = [floor + 1.0, 0.0, -1.0 / r ** 2]
    f = PiecewisePoly([0.0, mode, 1.0], [left, right])
    return f * (1.0 / f.integral())


DENSITIES = {
    "triangular": lambda: triangular_density(0.5),
    "quadratic-0.7": lambda: quadratic_density(0.7),
    "quadratic-0.3": lambda: quadratic_density(0.3),
}


def tabulated_quantile(f: PiecewisePoly, n: int = 1025) -> PiecewisePoly:
    """Piecewise-linear interpolant of the quantile of density ``f`` on ``n`` rank nodes."""
    u = np.linspace(0.0, 1.0, n)
    cdf = f.antiderivative()
    q = cdf.invert_values(u)
    q[0], q[-1] = f.lo, f.hi
    return PiecewisePoly.linear_interp(u, q)


def _poly(p: PiecewisePoly) -> PolyModel:
    return PolyModel.of(p)


def _sep(terms) -> list:
    return [(_poly(g), _poly(h)) for g, h in terms]


def kg_scenario() -> Scenario:
    """Binary state with prior 0.3 on the high state; the agent acts iff the posterior reaches 1/2."""
    one = PiecewisePoly.constant(1.0)
    w = PiecewisePoly.identity()
    return Scenario(
        name="kg", orientation=PERSUASION,
        description="binary-state persuasion, prior 0.3, agent threshold 1/2, principal wants high decisions",
        primitive=SeparableSpec(agent=_sep([(w - 0.5, one)]), principal=_sep([(one, one)])),
        state_distribution=DistributionSpec(kind="discrete", points=[0.0, 1.0], probs=[0.7, 0.3]),
        critical_points=[0.4], candidate=[0.0, 0.4, 1.0], anchors={"principal": 0.0, "agent": 0.0})


def step_scenario(switch: float = 1.0 / 3.0, orientation: str = PERSUASION,
                  decision_domain: tuple[float, float] = (-1.0 / 3.0, 4.0 / 3.0)) -> Scenario:
    """Agent U = -(theta - x)^2; principal ideal jumps from 1/6 to 2/3 at ``switch``."""
    sd = (0.0, 1.0)
    t = PiecewisePoly([0.0, switch, 1.0], [[2.0 / 6.0], [4.0 / 3.0]])  # 2 * ideal
    one_s, one_x = PiecewisePoly.constant(1.0, *sd), PiecewisePoly.constant(1.0, *decision_domain)
    th = PiecewisePoly.identity(*sd)
    xx = PiecewisePoly.identity(*decision_domain)
    agent = [(th * 2.0, one_x), (one_s, xx * -2.0)]
    principal = [(t, one_x), (one_s, xx * -2.0)]
    if orientation == PERSUASION:
        cand = [0.0, switch, 1.0]
    else:
        lo, hi = decision_domain
        cand = sorted({lo, 1.0 / 6.0, 2.0 / 3.0, hi})
    return Scenario(
        name=f"step-{orientation}-{switch:.6g}", orientation=orientation,
        description="quadratic agent loss, principal ideal 1/6 below the switch and 2/3 above",
        primitive=SeparableSpec(agent=_sep(agent), principal=_sep(principal)),
        critical_points=[switch, 1.0 / 6.0, 2.0 / 3.0], candidate=cand)


def uniform_quadratic_scenario(delta: float = 0.1, decision_domain=(0.0, 1.0)) -> Scenario:
    b = PiecewisePoly.identity()
    return Scenario(name=f"uniform-quadratic-{delta:g}", description="uniform state, principal bias delta",
                    primitive=LinearSpec(b=_poly(b), c=_poly(PiecewisePoly.identity(*decision_domain)),
                                         d=_poly(b + delta)))


def ms1991_scenario(k: float, decision_domain=(-2.0, 3.0)) -> Scenario:
    b = PiecewisePoly.identity()
    return Scenario(name=f"ms1991-k{k:g}", description="uniform state, d(t) = k t",
                    primitive=LinearSpec(b=_poly(b), c=_poly(PiecewisePoly.identity(*decision_domain)),
                                         d=_poly(PiecewisePoly.polynomial([0.0, k]))))


def regulation_scenario(density: str = "triangular", theta_bar: float = 1.0, n_quantile: int = 1025) -> Scenario:
    """Price regulation as linear delegation over cost ranks: b = 1 + q, c = 2x, d = 2q.

    The principal marginal is doubled so that it shares c with the agent; this
    rescales the principal's payoff and leaves every optimal set unchanged.
    """
    f = DENSITIES[density]()
    q = tabulated_quantile(f, n_quantile)
    return Scenario(
        name=f"regulation-{density}-{theta_bar:g}",
        description="monopoly price regulation with linear demand and unimodal cost density",
        primitive=LinearSpec(b=_poly(q + 1.0), c=_poly(PiecewisePoly.polynomial([0.0, 2.0], 0.0, theta_bar)),
                             d=_poly(q * 2.0)),
        regulation=RegulationSpec(density=_poly(f), theta_bar=theta_bar))


def producer_scenario(density: str = "triangular", n_quantile: int = 1025) -> Scenario:
    """Producer facing an uncertain price; costs C' = (1 + q)/2 and D' = q with q the cost quantile."""
    f = DENSITIES[density]()
    q = tabulated_quantile(f, n_quantile)
    return Scenario(
        name=f"producer-{density}", orientation=PERSUASION,
        description="persuasion about a uniform price; producer cost C, social cost D",
        primitive=LinearSpec(b=_poly((q + 1.0) * 0.5), c=_poly(PiecewisePoly.identity()), d=_poly(q)),
        regulation=RegulationSpec(density=_poly(f), theta_bar=1.0))


BUNDLED = {
    "kg": kg_scenario,
    "regulation-triangular": lambda: regulation_scenario("triangular", 1.0),
    "regulation-triangular-2": lambda: regulation_scenario("triangular", 2.0),
    "regulation-quadratic-0.7": lambda: regulation_scenario("quadratic-0.7", 1.0),
    "regulation-quadratic-0.3": lambda: regulation_scenario("quadratic-0.3", 1.0),
    "producer": producer_scenario,
    "step-persuasion": lambda: step_scenario(1.0 / 3.0, PERSUASION),
    "step-delegation": lambda: step_scenario(5.0 / 12.0, DELEGATION),
    "uniform-quadratic": uniform_quadratic_scenario,
    "ms1991-k1": lambda: ms1991_scenario(1.0),
    "ms1991-k3": lambda: ms1991_scenario(3.0),
}


__all__ = ["Scenario", "PolyModel", "LinearSpec", "SeparableSpec", "TabulatedSpec", "DistributionSpec",
           "RegulationSpec", "NuSpec", "canonical_json", "load_scenario", "to_distribution", "to_primitive",
           "to_set", "set_domain", "nu_problem", "triangular_density", "quadratic_density", "DENSITIES",
           "tabulated_quantile", "kg_scenario", "step_scenario", "uniform_quadratic_scenario", "ms1991_scenario",
           "regulation_scenario", "producer_scenario", "BUNDLED"]
