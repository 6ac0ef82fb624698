"""Operations behind the HTTP API and the command line.

Every function takes plain data (a scenario or its pieces) and returns a
``Result``: a JSON-ready report plus named tables destined for CSV files.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import TieBreak, decision_schedule
from .domain import DELEGATION, GridField, MonotoneSet, Primitive, SeparableField
from .equivalence import duality_residual, quantile_reparameterize, transform, value_scale
from .oracle import enumerate_optimum
from .poly import PiecewisePoly
from .scenario import (BUNDLED, DistributionSpec, GridModel, LinearSpec, PolyModel, Scenario, SeparableSpec,
                       TabulatedSpec, load_scenario, nu_problem, set_domain, to_primitive, to_set)
from .solver import classify_and_solve, solve_upper_censorship, verify_optimal
from .valuation import NuFunction, expected_nu, expected_payoffs

TABLE_COLUMNS = {
    "nu": ("m", "nu", "dnu"),
    "price": ("gamma", "x_star"),
    "partition": ("interval_lo", "interval_hi", "kind"),
}


@dataclass
class Result:
    report: dict
    tables: dict = field(default_factory=dict)
    verified: bool | None = None

    def to_dict(self) -> dict:
        return {"report": self.report, "tables": self.tables}


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def nu_table(nu: NuFunction, lo: float | None = None, hi: float | None = None, n: int = 201) -> list[list[float]]:
    lo = nu.domain[0] if lo is None else lo
    hi = nu.domain[1] if hi is None else hi
    m = np.linspace(lo, hi, n)
    return [[float(a), float(b), float(c)] for a, b, c in zip(m, nu(m), nu.slope(m))]


def price_table(p: PiecewisePoly, n: int = 201) -> list[list[float]]:
    g = np.linspace(p.lo, p.hi, n)
    return [[float(a), float(b)] for a, b in zip(g, p(g))]


def partition_table(pi: MonotoneSet) -> list[list]:
    rows = []
    for a, b in pi.intervals:
        rows.append([a, b, "point" if a == b else "separated"])
    for a, b in pi.pools():
        rows.append([a, b, "pool"])
    return sorted(rows, key=lambda r: (r[0], r[1]))


# ---------------------------------------------------------------------------
# primitive serialization
# ---------------------------------------------------------------------------

def primitive_to_scenario(p: Primitive, name: str | None = None) -> Scenario:
    def terms(f: SeparableField):
        return [(PolyModel.of(g), PolyModel.of(h)) for g, h in f.terms]

    def grid(f: GridField):
        return GridModel(thetas=f.thetas.tolist(), xs=f.xs.tolist(), values=f.values.tolist())

    if p.linear is not None:
        L = p.linear
        spec = LinearSpec(b=PolyModel.of(L.b), c=PolyModel.of(L.c), d=PolyModel.of(L.d))
    elif isinstance(p.agent, SeparableField) and isinstance(p.principal, SeparableField):
        spec = SeparableSpec(agent=terms(p.agent), principal=terms(p.principal))
    else:
        a = p.agent if isinstance(p.agent, GridField) else GridField.from_function(
            p.agent.eval, p.state_domain, p.decision_domain)
        b = p.principal if isinstance(p.principal, GridField) else GridField.from_function(
            p.principal.eval, p.state_domain, p.decision_domain)
        spec = TabulatedSpec(agent=grid(a), principal=grid(b))
    dist = None
    if p.state_dist is not None:
        lo, hi = p.state_domain
        dist = DistributionSpec(kind="uniform", lo=lo, hi=hi)
    return Scenario(name=name or p.name, orientation=p.orientation, primitive=spec, state_distribution=dist)


def _tb(s: Scenario, tb) -> TieBreak:
    return TieBreak(tb) if tb is not None else s.tie_break


def _set(s: Scenario, p: Primitive, items) -> MonotoneSet:
    items = items if items is not None else s.candidate
    if items is None:
        raise ValueError("no set given and the scenario has no candidate")
    return to_set(items, set_domain(p))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def run_transform(scenario, grid: int = 64) -> Result:
    s = load_scenario(scenario)
    p = to_primitive(s, validate=False)
    q = transform(p)
    pd = p if p.orientation == DELEGATION else q
    pp = q if p.orientation == DELEGATION else p
    if pd.state_dist is not None and not pd.state_dist.is_uniform:
        pd = quantile_reparameterize(pd)
    if pp.state_dist is not None and not pp.state_dist.is_uniform:
        pp = quantile_reparameterize(pp)
    out = primitive_to_scenario(q, name=f"{s.name}-{q.orientation}")
    return Result({
        "source": p.orientation,
        "target": q.orientation,
        "duality_residual": duality_residual(pd, pp, grid).to_dict(),
        "value_scale": value_scale(pd),
        "scenario": out.model_dump(mode="json"),
    })


def run_eval(scenario, items=None, tb=None, twin: bool = True, schedule: int = 0) -> Result:
    """Payoffs of a set, optionally also on the equivalent problem."""
    s = load_scenario(scenario)
    p = to_primitive(s, validate=False)
    t = _tb(s, tb)
    pi = _set(s, p, items)
    v = expected_payoffs(p, pi, t)
    anchors = s.anchors or {}
    rep = {
        "scenario": s.name,
        "orientation": p.orientation,
        "set": pi.to_list(),
        "tie_break": t.value,
        "principal": v.principal,
        "agent": v.agent,
        "unnormalized": {"principal": v.principal + anchors.get("principal", 0.0),
                         "agent": v.agent + anchors.get("agent", 0.0)},
    }
    if twin:
        q = transform(p)
        w = expected_payoffs(q, pi, t)
        pd = p if p.orientation == DELEGATION else q
        if pd.state_dist is not None and not pd.state_dist.is_uniform:
            pd = quantile_reparameterize(pd)
        k = value_scale(pd)
        dv, pv = (v, w) if p.orientation == DELEGATION else (w, v)
        rep["twin"] = {"orientation": q.orientation, "principal": w.principal, "agent": w.agent,
                       "value_scale": k,
                       "gap_principal": abs(dv.principal * k - pv.principal),
                       "gap_agent": abs(dv.agent * k - pv.agent)}
    if schedule:
        base = p if p.state_dist is None or p.state_dist.is_uniform else quantile_reparameterize(p)
        th = np.linspace(*base.state_domain, schedule)
        rep["schedule"] = [[float(a), float(b)] for a, b in zip(th, decision_schedule(base, pi, th, t))]
    return Result(rep, {"partition": partition_table(pi)})


def run_solve_regulation(density=None, theta_bar: float = 1.0, scenario=None) -> Result:
    if scenario is not None:
        s = load_scenario(scenario)
        if s.regulation is None:
            raise ValueError(f"scenario {s.name!r} has no regulation section")
        f = s.regulation.density.build()
        theta_bar = s.regulation.theta_bar if theta_bar is None else theta_bar
    else:
        f = density if isinstance(density, PiecewisePoly) else PolyModel.model_validate(density).build()
    sol = solve_upper_censorship(f, theta_bar)
    rep = sol.to_dict()
    rep.pop("price_fn")
    rep["certificate"] = sol.certificate.to_dict()
    rep["certificate"].pop("p_fn")
    return Result(rep, {"price": price_table(sol.price_fn), "nu": nu_table(sol.nu, 0.0, theta_bar),
                        "partition": partition_table(sol.pi)}, sol.certificate.verified)


def run_solve_linear(scenario) -> Result:
    s = load_scenario(scenario)
    nu, c, F = nu_problem(s)
    sol = classify_and_solve(nu, c, F)
    rep = {"scenario": s.name, **sol.to_dict()}
    rep["certificate"].pop("p_fn")
    lo, hi = float(c(c.lo)), float(c.left_limit(c.hi))
    return Result(rep, {"nu": nu_table(nu, lo, hi), "partition": partition_table(sol.pi)},
                  sol.certificate.verified)


def run_verify(scenario, items=None) -> Result:
    s = load_scenario(scenario)
    nu, c, F = nu_problem(s)
    items = items if items is not None else s.candidate
    if items is None:
        raise ValueError("no candidate set to verify")
    pi = to_set(items, c.domain)
    cert = verify_optimal(pi, nu, c, F)
    rep = {"scenario": s.name, "set": pi.to_list(), "value": expected_nu(pi, nu, c, F), **cert.to_dict()}
    rep.pop("p_fn")
    p = cert.p_fn
    return Result(rep, {"price": price_table(p), "partition": partition_table(pi)}, cert.verified)


def run_oracle(scenario, n: int = 10, mode: str | None = None, family: str = "full", top_k: int = 10,
               seed: int = 0, tb=None) -> Result:
    """Exhaustive grid search; mode is delegation, persuasion or linear."""
    s = load_scenario(scenario)
    t = _tb(s, tb)
    if mode == "linear" or (mode is None and s.primitive is None):
        nu, c, F = nu_problem(s)
        problem = (nu, c) if F is None else (nu, c, F)
    else:
        problem = to_primitive(s, validate=False)
        if mode is not None and mode != problem.orientation:
            problem = transform(problem)
    res = enumerate_optimum(problem, n, t, family=family, critical_points=s.critical_points, top_k=top_k,
                            seed=seed)
    rep = {"scenario": s.name, **res.to_dict()}
    return Result(rep, {"partition": partition_table(res.best),
                        "top": [[r[0], r[1], r[2].describe()] for r in res.ranked]})


# ---------------------------------------------------------------------------
# demos
# ---------------------------------------------------------------------------

def demo_kg() -> Result:
    s = BUNDLED["kg"]()
    o = run_oracle(s, n=10, mode="delegation")
    e = run_eval(s, items=o.report["best"])
    rep = {
        "oracle": {k: o.report[k] for k in ("best", "best_str", "value", "n", "mode")},
        "persuasion_value": e.report["principal"],
        "delegation_value": e.report["twin"]["principal"],
        "gap": e.report["twin"]["gap_principal"],
    }
    return Result(rep, {"partition": o.tables["partition"]})


def demo_regulation(density: str = "triangular") -> Result:
    from .scenario import DENSITIES
    f = DENSITIES[density]()
    one = run_solve_regulation(f, 1.0)
    two = run_solve_regulation(f, 2.0)
    rep = {
        "density": density,
        "theta_star": one.report["theta_star"],
        "theta_star_star": two.report["theta_star"],
        "ordered": one.report["theta_star"] > two.report["theta_star"],
        "with_participation": one.report,
        "without_participation": two.report,
    }
    tables = {"price": one.tables["price"], "price_no_participation": two.tables["price"],
              "nu": one.tables["nu"], "partition": one.tables["partition"]}
    return Result(rep, tables, one.verified and two.verified)


def demo_producer() -> Result:
    s = BUNDLED["producer"]()
    f = s.regulation.density.build()
    sol = solve_upper_censorship(f, 1.0)
    p = to_primitive(s)
    uc = expected_payoffs(p, sol.pi)
    full = expected_payoffs(p, MonotoneSet.full())
    none = expected_payoffs(p, MonotoneSet.trivial())
    rep = {
        "cutoff": sol.theta_star,
        "set": sol.pi.to_list(),
        "upper_censorship": uc.to_dict(),
        "full_disclosure": full.to_dict(),
        "no_disclosure": none.to_dict(),
        "regulation_value": sol.value,
        "gap_to_regulation": abs(uc.principal - sol.value),
    }
    return Result(rep, {"partition": partition_table(sol.pi), "price": price_table(sol.price_fn)},
                  sol.certificate.verified)


DEMOS = {"kg": demo_kg, "regulation-triangular": demo_regulation, "producer": demo_producer}


def run_demo(name: str) -> Result:
    if name not in DEMOS:
        raise ValueError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}")
    return DEMOS[name]()


__all__ = ["Result", "TABLE_COLUMNS", "nu_table", "price_table", "partition_table", "primitive_to_scenario",
           "run_transform", "run_eval", "run_solve_regulation", "run_solve_linear", "run_verify", "run_oracle",
           "run_demo", "DEMOS"]
