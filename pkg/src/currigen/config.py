"""Run configuration: a single YAML file validated into pydantic models,

plus factories that turn backend specs into live objects. API keys come
only from the environment (never the config file)."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field

from currigen.backends import HttpChatBackend, ScriptedBackend
from currigen.dataset import SEED_QUOTA_DEFAULT, SubjectCategory
from currigen.errors import DatasetError, StorageError, ValidationError
from currigen.synthetic import MockAgentBackend, SyntheticStudent


class BackendSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["http", "mock", "scripted"] = "mock"
    base_url: str = ""
    model: str = ""
    api_key_env: str = "CURRICULUM_API_KEY"
    timeout: float = Field(120.0, gt=0)
    max_tokens: Optional[int] = Field(None, ge=1)
    script_path: Optional[str] = None
    verifier_noise: float = Field(0.0, ge=0.0, lt=1.0)


class StudentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["http", "synthetic"] = "synthetic"
    base_url: str = ""
    model: str = ""
    api_key_env: str = "STUDENT_API_KEY"
    timeout: float = Field(120.0, gt=0)
    max_tokens: Optional[int] = Field(None, ge=1)
    temperature: float = Field(0.7, ge=0.0)
    capability: float = Field(3.0, gt=0.0)
    mode: Literal["threshold", "logistic"] = "threshold"
    slope: float = Field(2.0, gt=0.0)


class Temperatures(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tagging: float = Field(0.0, ge=0.0)
    verification: float = Field(0.0, ge=0.0)
    generation: float = Field(0.7, ge=0.0)
    solving: float = Field(0.7, ge=0.0)


class BoundsSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: int = Field(1, ge=1)
    tau: int = Field(2, ge=1)


class PacingSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    amplitude: float = Field(1.0, gt=0)
    epsilon: float = Field(0.5, gt=0)
    eta: float = Field(0.2, ge=0)
    delta: Optional[float] = Field(None, ge=0)
    c0: float = Field(1.0, gt=0)
    target: float = 8.0
    max_rounds: int = Field(500, ge=0)
    scale_max: float = Field(10.0, gt=0)
    batch_size: int = Field(16, ge=1)
    trials: int = Field(100, ge=1)
    policies: list = Field(
        default_factory=lambda: ["bidirectional", "unidirectional", "static", "random"]
    )


def _default_quota() -> dict:
    return {subject.value: count for subject, count in SEED_QUOTA_DEFAULT.items()}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    run_name: str = "run"
    run_dir: str = "runs/run"
    corpus_path: Optional[str] = None
    rounds: int = Field(4, ge=0)
    error_threshold: int = Field(3, ge=1)
    rng_seed: int = 0
    concurrency: int = Field(1, ge=1)
    train_on_seed_round0: bool = True
    required_tags: list[str] = Field(default_factory=lambda: ["think"])
    retries: int = Field(2, ge=0)
    temperatures: Temperatures = Field(default_factory=Temperatures)
    fanout: dict[str, int] = Field(
        default_factory=lambda: {
            "reduced": 1, "reversed": 1, "increased": 1, "diversified": 1,
        }
    )
    bounds: BoundsSpec = Field(default_factory=BoundsSpec)
    quota: dict[str, int] = Field(default_factory=_default_quota)
    generator: BackendSpec = Field(default_factory=BackendSpec)
    verifier: BackendSpec = Field(default_factory=BackendSpec)
    student: StudentSpec = Field(default_factory=StudentSpec)
    pacing: PacingSpec = Field(default_factory=PacingSpec)
    deterministic_timing: Optional[bool] = None
    post_round_command: Optional[list[str]] = None

    @pydantic.field_validator("fanout")
    @classmethod
    def _check_fanout(cls, value: dict) -> dict:
        legal = {"reduced", "reversed", "increased", "diversified"}
        for key, count in value.items():
            if key not in legal:
                raise ValueError(f"unknown fanout kind: {key!r}")
            if not isinstance(count, int) or count < 0:
                raise ValueError(f"fanout[{key}] must be an integer >= 0")
        return value

    @pydantic.field_validator("quota")
    @classmethod
    def _check_quota(cls, value: dict) -> dict:
        for key, count in value.items():
            try:
                SubjectCategory.parse(key)
            except DatasetError as exc:
                # a bad label is a config mistake, not a storage failure
                raise ValueError(str(exc)) from exc
            if not isinstance(count, int) or count < 0:
                raise ValueError(f"quota[{key}] must be an integer >= 0")
        return value

    def timing_is_deterministic(self) -> bool:
        """Auto mode: wall-clock fields are zeroed whenever no live HTTP

        backend is involved, so repeat runs are byte-identical."""
        if self.deterministic_timing is not None:
            return self.deterministic_timing
        return (
            self.generator.kind != "http"
            and self.verifier.kind != "http"
            and self.student.kind != "http"
        )


# fields that do not change what data the run produces
_NON_SEMANTIC = {"run_dir", "run_name", "concurrency", "deterministic_timing"}


def config_hash(config: RunConfig) -> str:
    payload = config.model_dump(mode="json")
    for key in _NON_SEMANTIC:
        payload.pop(key, None)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def load_config_data(path) -> dict:
    """YAML file → raw mapping, before validation (so callers can layer

    flag overrides on top)."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(str(path), f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a mapping at top level")
    return data


def load_config(path) -> RunConfig:
    return config_from_dict(load_config_data(path))


def config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ValidationError(f"invalid config at {where}: {first['msg']}") from exc


def build_agent_backend(spec: BackendSpec):
    if spec.kind == "mock":
        return MockAgentBackend(verifier_noise=spec.verifier_noise)
    if spec.kind == "scripted":
        if not spec.script_path:
            raise ValidationError("scripted backend requires script_path")
        return ScriptedBackend.from_file(spec.script_path)
    if not spec.base_url:
        raise ValidationError("http backend requires base_url")
    return HttpChatBackend(
        base_url=spec.base_url,
        model=spec.model,
        api_key_env=spec.api_key_env,
        timeout=spec.timeout,
        max_tokens=spec.max_tokens,
    )


def build_student(spec: StudentSpec, rng_seed: int, capability: Optional[float] = None):
    """capability (from a checkpoint) overrides the configured start."""
    if spec.kind == "synthetic":
        return SyntheticStudent(
            capability=capability if capability is not None else spec.capability,
            mode=spec.mode,
            slope=spec.slope,
            rng_seed=rng_seed,
        )
    from currigen.diagnostics import BackendStudent

    if not spec.base_url:
        raise ValidationError("http student requires base_url")
    backend = HttpChatBackend(
        base_url=spec.base_url,
        model=spec.model,
        api_key_env=spec.api_key_env,
        timeout=spec.timeout,
        max_tokens=spec.max_tokens,
    )
    return BackendStudent(backend, temperature=spec.temperature)
