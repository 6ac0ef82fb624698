"""Transforms between delegation and persuasion primitives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DELEGATION, PERSUASION, GridField, LinearForm, Primitive, QuantileDistribution
from .errors import WrongOrientation


@dataclass(frozen=True)
class DualityResidual:
    max_abs_U: float
    max_abs_V: float
    grid_size: int

    def to_dict(self) -> dict:
        return {"max_abs_U": self.max_abs_U, "max_abs_V": self.max_abs_V, "grid_size": self.grid_size}


def _swap(p: Primitive, target: str) -> Primitive:
    if p.state_dist is not None and not p.state_dist.is_uniform:
        p = quantile_reparameterize(p)
    agent = p.agent.transposed()
    principal = p.principal.transposed()
    lin = None
    if p.linear is not None:
        # b(theta) - c(x) transposed and negated is c(theta) - b(x): same functions, other orientation
        lin = LinearForm(p.linear.b, p.linear.c, p.linear.d)
    dist = QuantileDistribution.uniform(*agent.state_domain)
    return Primitive(target, agent, principal, dist, lin, p.name, p.warnings)


def delegation_to_persuasion(p: Primitive) -> Primitive:
    """Persuasion primitive with dU_P/dx(theta, x) = -dU_D/dx(x, theta), likewise for V."""
    if p.orientation != DELEGATION:
        raise WrongOrientation("expected a delegation primitive")
    return _swap(p, PERSUASION)


def persuasion_to_delegation(p: Primitive) -> Primitive:
    if p.orientation != PERSUASION:
        raise WrongOrientation("expected a persuasion primitive")
    return _swap(p, DELEGATION)


def transform(p: Primitive) -> Primitive:
    return delegation_to_persuasion(p) if p.orientation == DELEGATION else persuasion_to_delegation(p)


def duality_residual(pD: Primitive, pP: Primitive, n: int = 64) -> DualityResidual:
    """Max over an n x n grid of |dU_D/dx(tD, tP) + dU_P/dx(tP, tD)| and the V analogue."""
    tD = np.linspace(*pD.state_domain, n)
    tP = np.linspace(*pD.decision_domain, n)
    A, B = np.meshgrid(tD, tP, indexing="ij")
    rU = np.abs(pD.agent.eval(A, B) + pP.agent.eval(B, A))
    rV = np.abs(pD.principal.eval(A, B) + pP.principal.eval(B, A))
    return DualityResidual(float(rU.max()), float(rV.max()), n)


def value_scale(pD: Primitive) -> float:
    """Ratio between persuasion and delegation expectations for a transformed pair.

    Both problems share the same double integral; expectations divide it by the
    length of the respective state domain.
    """
    sd = pD.state_domain
    dd = pD.decision_domain
    return (sd[1] - sd[0]) / (dd[1] - dd[0])


def quantile_reparameterize(p: Primitive) -> Primitive:
    """Replace the state by its quantile rank so that it becomes uniform on [0, 1]."""
    F = p.state_dist
    if F is None or F.is_uniform and np.allclose(p.state_domain, (0.0, 1.0)):
        return p
    if F.quantile is None:
        # only a density is known: tabulate the composed fields
        th = np.linspace(0.0, 1.0, 257)
        mapped = np.clip(F.ppf(th), *p.state_domain)

        def tab(u):
            xs = np.linspace(*u.decision_domain, 257)
            T, X = np.meshgrid(mapped, xs, indexing="ij")
            return GridField(th, xs, u.eval(T, X))

        return Primitive(p.orientation, tab(p.agent), tab(p.principal), QuantileDistribution.uniform(), None,
                         p.name, p.warnings)
    q = F.quantile
    agent = p.agent.compose_state(q)
    principal = p.principal.compose_state(q)
    lin = None
    if p.linear is not None:
        L = p.linear
        if p.orientation == DELEGATION:
            lin = LinearForm(L.b.compose(q), L.c, L.d.compose(q))
        else:
            lin = LinearForm(L.b, L.c.compose(q), L.d)
    return Primitive(p.orientation, agent, principal, QuantileDistribution.uniform(), lin, p.name, p.warnings)


__all__ = ["DualityResidual", "delegation_to_persuasion", "persuasion_to_delegation", "transform",
           "duality_residual", "value_scale", "quantile_reparameterize"]
