"""HTTP surface over the operation layer.

Each endpoint resolves a RunConfig from the request (inline mapping or a
YAML path plus overrides), runs the matching op, and returns its dict.
Engine errors map to one status family per error kind.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import currigen
from currigen import ops
from currigen.config import RunConfig, config_from_dict, load_config_data
from currigen.errors import CurrigenError
from currigen.service import schemas

_STATUS_BY_KIND = {
    "validation": 422,
    "io": 404,
    "backend": 502,
    "parse": 502,
}


def resolve_config(req: schemas.OperationRequest) -> RunConfig:
    if req.config is not None and req.config_path is not None:
        raise CurrigenError("pass config inline or config_path, not both")
    data = dict(req.config) if req.config is not None else {}
    if req.config_path is not None:
        data = load_config_data(req.config_path)
    if req.run_dir is not None:
        data["run_dir"] = req.run_dir
    if req.rng_seed is not None:
        data["rng_seed"] = req.rng_seed
    if isinstance(req, schemas.SeedRequest) and req.corpus_path is not None:
        data["corpus_path"] = req.corpus_path
    if isinstance(req, schemas.RunRequest) and req.rounds is not None:
        data["rounds"] = req.rounds
    if isinstance(req, schemas.SimulateRequest) and req.trials is not None:
        pacing = dict(data.get("pacing") or {})
        pacing["trials"] = req.trials
        data["pacing"] = pacing
    return config_from_dict(data)


def create_app() -> FastAPI:
    app = FastAPI(title="currigen", version=currigen.__version__)

    @app.exception_handler(CurrigenError)
    async def _engine_error(request: Request, exc: CurrigenError):
        status = _STATUS_BY_KIND.get(exc.kind, 422)
        body = schemas.ErrorBody(code=exc.kind, message=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return schemas.HealthResponse(status="ok", version=currigen.__version__)

    @app.post("/runs/seed", response_model=schemas.SeedResponse)
    def seed(req: schemas.SeedRequest):
        return ops.op_seed(resolve_config(req))

    @app.post("/runs/tag", response_model=schemas.TagResponse)
    def tag(req: schemas.TagRequest):
        return ops.op_tag(resolve_config(req), req.pool_path, req.out_path)

    @app.post("/runs/eval", response_model=schemas.EvalResponse)
    def eval_(req: schemas.EvalRequest):
        return ops.op_eval(resolve_config(req))

    @app.post("/runs/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        return ops.op_generate(resolve_config(req))

    @app.post("/runs/evolve", response_model=schemas.EvolveResponse)
    def evolve(req: schemas.EvolveRequest):
        return ops.op_evolve(resolve_config(req))

    @app.post("/runs/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        return ops.op_run(resolve_config(req), resume=req.resume)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        return ops.op_simulate(resolve_config(req))

    @app.get("/runs/report", response_model=schemas.ReportResponse)
    def report(run_dir: str | None = None, config_path: str | None = None):
        data = load_config_data(config_path) if config_path else {}
        if run_dir is not None:
            data["run_dir"] = run_dir
        return ops.op_report(config_from_dict(data))

    return app
