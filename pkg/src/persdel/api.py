"""HTTP service wrapping the core operations."""
from __future__ import annotations

from typing import Literal, Optional, Union

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, ValidationError

from . import service
from .agent import TieBreak
from .errors import PersDelError
from .scenario import DENSITIES, PolyModel, Scenario, load_scenario

SetItems = list[Union[float, tuple[float, float]]]
ScenarioRef = Union[Scenario, str]


class _Req(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TransformRequest(_Req):
    scenario: ScenarioRef
    grid: int = 64


class EvalRequest(_Req):
    scenario: ScenarioRef
    set: Optional[SetItems] = None
    tie_break: Optional[TieBreak] = None
    twin: bool = True
    schedule: int = 0


class RegulationRequest(_Req):
    density: Optional[PolyModel] = None
    density_name: Optional[str] = None
    scenario: Optional[ScenarioRef] = None
    theta_bar: Optional[float] = None


class LinearRequest(_Req):
    scenario: ScenarioRef


class VerifyRequest(_Req):
    scenario: ScenarioRef
    set: Optional[SetItems] = None


class OracleRequest(_Req):
    scenario: ScenarioRef
    n: int = 10
    mode: Optional[Literal["delegation", "persuasion", "linear"]] = None
    family: Literal["full", "cells"] = "full"
    top_k: int = 10
    seed: int = 0
    tie_break: Optional[TieBreak] = None


class ResultModel(BaseModel):
    report: dict
    tables: dict
    verified: Optional[bool] = None


def _out(r: service.Result) -> ResultModel:
    return ResultModel(report=r.report, tables=r.tables, verified=r.verified)


def _density(req: RegulationRequest):
    if req.density is not None:
        return req.density.build()
    if req.density_name is not None:
        if req.density_name not in DENSITIES:
            raise ValueError(f"unknown density {req.density_name!r}; choose from {sorted(DENSITIES)}")
        return DENSITIES[req.density_name]()
    return None


def handle_transform(req: TransformRequest) -> service.Result:
    return service.run_transform(load_scenario(req.scenario), req.grid)


def handle_eval(req: EvalRequest) -> service.Result:
    return service.run_eval(load_scenario(req.scenario), req.set, req.tie_break, req.twin, req.schedule)


def handle_regulation(req: RegulationRequest) -> service.Result:
    f = _density(req)
    if f is not None:
        return service.run_solve_regulation(f, 1.0 if req.theta_bar is None else req.theta_bar)
    if req.scenario is None:
        raise ValueError("give a density, a density name or a scenario")
    return service.run_solve_regulation(theta_bar=req.theta_bar, scenario=load_scenario(req.scenario))


def handle_linear(req: LinearRequest) -> service.Result:
    return service.run_solve_linear(load_scenario(req.scenario))


def handle_verify(req: VerifyRequest) -> service.Result:
    return service.run_verify(load_scenario(req.scenario), req.set)


def handle_oracle(req: OracleRequest) -> service.Result:
    return service.run_oracle(load_scenario(req.scenario), req.n, req.mode, req.family, req.top_k, req.seed,
                              req.tie_break)


HANDLERS = {
    "/transform": (TransformRequest, handle_transform),
    "/eval": (EvalRequest, handle_eval),
    "/solve-regulation": (RegulationRequest, handle_regulation),
    "/solve-linear": (LinearRequest, handle_linear),
    "/verify": (VerifyRequest, handle_verify),
    "/oracle": (OracleRequest, handle_oracle),
}


def create_app() -> FastAPI:
    app = FastAPI(title="persdel", version="0.1.0",
                  description="Balanced delegation and monotone persuasion: transforms, payoffs, solvers, oracle")

    @app.exception_handler(PersDelError)
    @app.exception_handler(ValueError)
    @app.exception_handler(ValidationError)
    async def _bad_input(_: Request, exc: Exception):
        return JSONResponse(status_code=422, content={"error": type(exc).__name__, "message": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/transform", response_model=ResultModel)
    def transform(req: TransformRequest):
        return _out(handle_transform(req))

    @app.post("/eval", response_model=ResultModel)
    def evaluate(req: EvalRequest):
        return _out(handle_eval(req))

    @app.post("/solve-regulation", response_model=ResultModel)
    def solve_regulation(req: RegulationRequest):
        return _out(handle_regulation(req))

    @app.post("/solve-linear", response_model=ResultModel)
    def solve_linear(req: LinearRequest):
        return _out(handle_linear(req))

    @app.post("/verify", response_model=ResultModel)
    def verify(req: VerifyRequest):
        return _out(handle_verify(req))

    @app.post("/oracle", response_model=ResultModel)
    def oracle(req: OracleRequest):
        return _out(handle_oracle(req))

    @app.get("/demo/{name}", response_model=ResultModel)
    def demo(name: str):
        return _out(service.run_demo(name))

    return app


app = create_app()
