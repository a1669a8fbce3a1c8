"""Request/response bodies for the HTTP surface.

Every request carries the run configuration either inline (`config`) or as
a path to a YAML file on the service host (`config_path`), plus the few
per-call overrides the CLI exposes as flags.
"""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class OperationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: Optional[dict] = None
    config_path: Optional[str] = None
    run_dir: Optional[str] = None
    rng_seed: Optional[int] = None


class SeedRequest(OperationRequest):
    corpus_path: Optional[str] = None


class TagRequest(OperationRequest):
    pool_path: str
    out_path: str


class EvalRequest(OperationRequest):
    pass


class GenerateRequest(OperationRequest):
    pass


class EvolveRequest(OperationRequest):
    pass


class RunRequest(OperationRequest):
    rounds: Optional[int] = Field(default=None, ge=0)
    resume: bool = False


class SimulateRequest(OperationRequest):
    trials: Optional[int] = Field(default=None, ge=1)


class SeedResponse(BaseModel):
    run_dir: str
    val_size: int
    subjects: dict
    levels: dict
    report: dict


class TagResponse(BaseModel):
    pool_path: str
    out_path: str
    total: int
    subjects: dict
    levels: dict


class EvalResponse(BaseModel):
    round: int
    val_size: int
    hard_size: int
    easy_size: int
    eval_path: str


class GenerateResponse(BaseModel):
    round: int
    hard_size: int
    easy_size: int
    remedy_size: int
    advanced_size: int
    rejected_size: int
    out_dir: str


class EvolveResponse(BaseModel):
    round: int
    report: dict


class RunResponse(BaseModel):
    round: int
    rounds_executed: int
    train_size: int
    val_size: int
    cumulative_train_size: int
    student_capability: Optional[float] = None
    reports: list


class SimulateResponse(BaseModel):
    summary: dict
    summary_path: str
    csv_paths: dict


class ReportResponse(BaseModel):
    rounds: list
    levels: dict
    subjects: dict
    generated_total: int
    seed_size: int
    report_dir: str
    text: str


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    code: str
    message: str
