"""The co-evolution engine: error retention, train/val set updates, round

orchestration, checkpointing, and the SFT export boundary.

Set algebra per round, with threshold k (default 3):

    train'  =  accepted remedial variants  ∪  {missed problems with err > k}
    val'    =  {missed problems with err <= k}  ∪  accepted advanced variants

Solved problems leave the validation pool for good; they are archived to
mastered.jsonl and survive only as parents of advanced variants.
"""
from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from currigen import pacing
from currigen.dataset import (
    ProblemPool,
    distribution_report,
    dump_record,
    load_pool,
    save_pool,
)
from currigen.diagnostics import Partition, evaluate, partition
from currigen.errors import CheckpointError, StorageError, ValidationError
from currigen.generation import GenerationBatch, generate_batch

ROUND_FILES = (
    "train.jsonl",
    "val.jsonl",
    "remedy.jsonl",
    "advanced.jsonl",
    "rejected.jsonl",
    "mastered.jsonl",
    "eval.jsonl",
    "state.json",
    "report.json",
)

# decaying schedule metadata passed through to the external trainer
TRAINING_SCHEDULE = {
    "learning_rate": {"start": 5e-6, "end": 2e-6},
    "epochs": {"start": 6, "end": 3},
}


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    hard_size: int
    easy_size: int
    remedy_size: int
    advanced_size: int
    rejected_size: int
    persistent_transfers: int
    train_size: int
    train_delta: int
    cumulative_train_size: int
    val_size: int
    level_histogram: dict
    subject_histogram: dict
    duration_seconds: float

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "hard_size": self.hard_size,
            "easy_size": self.easy_size,
            "remedy_size": self.remedy_size,
            "advanced_size": self.advanced_size,
            "rejected_size": self.rejected_size,
            "persistent_transfers": self.persistent_transfers,
            "train_size": self.train_size,
            "train_delta": self.train_delta,
            "cumulative_train_size": self.cumulative_train_size,
            "val_size": self.val_size,
            "level_histogram": dict(self.level_histogram),
            "subject_histogram": dict(self.subject_histogram),
            "duration_seconds": self.duration_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoundReport":
        try:
            ints = {
                k: data[k]
                for k in (
                    "round_index", "hard_size", "easy_size", "remedy_size",
                    "advanced_size", "rejected_size", "persistent_transfers",
                    "train_size", "train_delta", "cumulative_train_size",
                    "val_size",
                )
            }
            for k, v in ints.items():
                if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                    raise CheckpointError(f"report field {k} must be a non-negative integer")
            duration = data["duration_seconds"]
            if not isinstance(duration, (int, float)) or isinstance(duration, bool):
                raise CheckpointError("report duration_seconds must be a number")
            levels = data["level_histogram"]
            subjects = data["subject_histogram"]
            if not isinstance(levels, dict) or not isinstance(subjects, dict):
                raise CheckpointError("report histograms must be objects")
        except KeyError as exc:
            raise CheckpointError(f"report missing field: {exc}") from None
        return cls(
            **ints,
            level_histogram=levels,
            subject_histogram=subjects,
            duration_seconds=float(duration),
        )


@dataclass
class CurriculumState:
    round: int
    train: ProblemPool
    val: ProblemPool
    error_threshold: int = 3
    history: list = field(default_factory=list)
    cumulative_train_ids: frozenset = frozenset()
    student_capability: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.round, int) or self.round < 0:
            raise ValidationError(f"round must be a non-negative integer, got {self.round!r}")
        if not isinstance(self.error_threshold, int) or self.error_threshold < 1:
            raise ValidationError(
                f"error threshold must be an integer >= 1, got {self.error_threshold!r}"
            )
        self._check_disjoint()

    def _check_disjoint(self):
        overlap = set(self.train.ids()) & set(self.val.ids())
        if overlap:
            raise ValidationError(
                f"train/val pools share ids: {sorted(overlap)[:5]}"
            )

    def check_invariants(self):
        """Full rest-state invariants. Mid-round, freshly bumped counters may

        sit one past the threshold until evolve() transfers them, so this is
        enforced at the stable points (seed, evolve output, checkpoints), not
        on every construction."""
        self._check_disjoint()
        over = [p.id for p in self.val if p.err_count > self.error_threshold]
        if over:
            raise ValidationError(
                f"validation problems past the error threshold: {over[:5]}"
            )


def seed_state(
    seed_pool: ProblemPool, error_threshold: int = 3, student_capability=None
) -> CurriculumState:
    """Round 0: the whole seed becomes the validation frontier, training

    starts empty."""
    seed_pool.require_tagged()
    val = ProblemPool(name="val", problems=seed_pool)
    state = CurriculumState(
        round=0,
        train=ProblemPool(name="train"),
        val=val,
        error_threshold=error_threshold,
        student_capability=student_capability,
    )
    state.check_invariants()
    return state


def update_error_counters(state: CurriculumState, hard: ProblemPool) -> CurriculumState:
    outside = [p.id for p in hard if p.id not in state.val]
    if outside:
        raise ValidationError(
            f"hard problems outside the validation pool: {outside[:5]}"
        )
    hard_ids = set(hard.ids())
    bumped = ProblemPool(
        name="val",
        problems=(
            p.with_err_count(p.err_count + 1) if p.id in hard_ids else p
            for p in state.val
        ),
    )
    return CurriculumState(
        round=state.round,
        train=state.train,
        val=bumped,
        error_threshold=state.error_threshold,
        history=list(state.history),
        cumulative_train_ids=state.cumulative_train_ids,
        student_capability=state.student_capability,
    )


def evolve(
    state: CurriculumState, part: Partition, batch: GenerationBatch
) -> CurriculumState:
    """Set update for one round. Counters must already be bumped: err truth

    is read from state.val, membership from the partition."""
    batch.validate()
    val_ids = set(state.val.ids())
    for pool in (part.hard, part.easy):
        outside = [p.id for p in pool if p.id not in val_ids]
        if outside:
            raise ValidationError(
                f"partition references ids outside the validation pool: {outside[:5]}"
            )
    part_ids = set(part.hard.ids()) | set(part.easy.ids())
    if part_ids != val_ids:
        raise ValidationError("partition does not cover the validation pool")

    fresh = set(batch.remedy.ids()) | set(batch.advanced.ids())
    stale = fresh & (val_ids | set(state.train.ids()))
    if stale:
        raise ValidationError(f"generated ids collide with existing pools: {sorted(stale)[:5]}")

    threshold = state.error_threshold
    hard_current = [state.val.get(pid) for pid in part.hard.ids()]
    stubborn = [p for p in hard_current if p.err_count > threshold]
    retained = [p for p in hard_current if p.err_count <= threshold]

    new_train = ProblemPool(name="train", problems=list(batch.remedy) + stubborn)
    new_val = ProblemPool(name="val", problems=retained + list(batch.advanced))
    new_state = CurriculumState(
        round=state.round + 1,
        train=new_train,
        val=new_val,
        error_threshold=threshold,
        history=list(state.history),
        cumulative_train_ids=frozenset(state.cumulative_train_ids | set(new_train.ids())),
        student_capability=state.student_capability,
    )
    new_state.check_invariants()
    return new_state


def _write_text(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise StorageError(str(path), f"cannot write: {exc}") from exc


def _dump_json(data) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def state_to_dict(state: CurriculumState) -> dict:
    return {
        "round": state.round,
        "error_threshold": state.error_threshold,
        "err_counts": {p.id: p.err_count for p in state.val},
        "cumulative_train_ids": sorted(state.cumulative_train_ids),
        "student_capability": state.student_capability,
        "history": [r.to_dict() for r in state.history],
    }


def checkpoint_save(state: CurriculumState, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_pool(state.train, directory / "train.jsonl")
    save_pool(state.val, directory / "val.jsonl")
    _write_text(directory / "state.json", _dump_json(state_to_dict(state)))
    last_report = state.history[-1].to_dict() if state.history else {}
    _write_text(directory / "report.json", _dump_json(last_report))


def _require(condition: bool, message: str):
    if not condition:
        raise CheckpointError(message)


def checkpoint_load(directory) -> CurriculumState:
    directory = Path(directory)
    state_path = directory / "state.json"
    try:
        raw = state_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read {state_path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise CheckpointError(f"corrupt state.json in {directory}: {exc}") from exc
    _require(isinstance(data, dict), "state.json must hold an object")

    round_index = data.get("round")
    _require(
        isinstance(round_index, int) and not isinstance(round_index, bool) and round_index >= 0,
        "state.json round must be a non-negative integer",
    )
    threshold = data.get("error_threshold")
    _require(
        isinstance(threshold, int) and not isinstance(threshold, bool) and threshold >= 1,
        "state.json error_threshold must be an integer >= 1",
    )
    err_counts = data.get("err_counts")
    _require(isinstance(err_counts, dict), "state.json err_counts must be an object")
    for pid, count in err_counts.items():
        _require(
            isinstance(count, int) and not isinstance(count, bool) and count >= 0,
            f"state.json err_count for {pid!r} must be a non-negative integer",
        )
    cumulative = data.get("cumulative_train_ids", [])
    _require(
        isinstance(cumulative, list) and all(isinstance(i, str) for i in cumulative),
        "state.json cumulative_train_ids must be a list of ids",
    )
    capability = data.get("student_capability")
    _require(
        capability is None
        or (isinstance(capability, (int, float)) and not isinstance(capability, bool)),
        "state.json student_capability must be a number or null",
    )
    history_raw = data.get("history", [])
    _require(isinstance(history_raw, list), "state.json history must be a list")
    history = [RoundReport.from_dict(r) for r in history_raw]

    train = load_pool(directory / "train.jsonl", name="train")
    val = load_pool(directory / "val.jsonl", name="val")

    # the counter map is redundant with val.jsonl on purpose: a mismatch
    # means one of the two files was edited behind our back
    recorded = dict(err_counts)
    actual = {p.id: p.err_count for p in val}
    _require(
        recorded == actual,
        f"err_counts in state.json disagree with val.jsonl in {directory}",
    )
    try:
        state = CurriculumState(
            round=round_index,
            train=train,
            val=val,
            error_threshold=threshold,
            history=history,
            cumulative_train_ids=frozenset(cumulative),
            student_capability=float(capability) if capability is not None else None,
        )
        state.check_invariants()
        return state
    except ValidationError as exc:
        raise CheckpointError(f"checkpoint in {directory} is inconsistent: {exc}") from exc


@dataclass
class ExportManifest:
    round_index: int
    count: int
    config_hash: str

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "counts": {"problems": self.count},
            "config_hash": self.config_hash,
            "schedule": TRAINING_SCHEDULE,
        }


def export_training_set(
    pool: ProblemPool,
    round_index: int,
    run_dir,
    config_hash: str = "",
) -> Path:
    """Writes sft_round_<t>.jsonl ({"query","solution"} per line, pool

    order) plus manifest.json next to it. Solutions must be present."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for p in pool:
        if not p.answer or not p.answer.strip():
            raise ValidationError(f"problem {p.id} has no solution to export")
        lines.append(dump_record({"query": p.query, "solution": p.answer}))
    path = run_dir / f"sft_round_{round_index}.jsonl"
    _write_text(path, "".join(line + "\n" for line in lines))
    manifest = ExportManifest(round_index, len(lines), config_hash)
    _write_text(run_dir / "manifest.json", _dump_json(manifest.to_dict()))
    return path


@dataclass
class BackendBundle:
    """Everything run_round needs to talk to the outside world."""

    student: object  # StudentBackend
    generator: object  # Backend for tagging/synthesis/solving
    verifier: object  # Backend for yes/no checks


@dataclass
class RoundSettings:
    fanout: dict = field(default_factory=dict)
    bounds: object = None  # generation.DifficultyBounds or None for defaults
    required_tags: tuple = ("think",)
    temperatures: dict = field(default_factory=dict)
    retries: int = 2
    rng_seed: int = 0
    concurrency: int = 1
    train_on_seed_round0: bool = True
    config_hash: str = ""
    # model-evolution hook: a command to run after export, or synthetic
    # capability dynamics driven by the pacing signal
    post_round_command: Optional[list] = None
    synthetic_eta: float = 0.2
    pacing_amplitude: float = 1.0


def _capability_update(state, train_pool, settings) -> Optional[float]:
    """Synthetic model-evolution: capability climbs with the mean pacing

    signal of the newly trained batch."""
    c = state.student_capability
    if c is None or len(train_pool) == 0:
        return c
    gains = [
        pacing.gradient_proxy(float(p.level), max(c, 1e-9), settings.pacing_amplitude)
        for p in train_pool
        if p.level is not None
    ]
    if not gains:
        return c
    return c + settings.synthetic_eta * (sum(gains) / len(gains))


def init_run(state: CurriculumState, run_dir, clock: Callable[[], float] = time.monotonic):
    """Writes the round_0 directory for a freshly seeded state."""
    round_dir = Path(run_dir) / "round_0"
    round_dir.mkdir(parents=True, exist_ok=True)
    report = RoundReport(
        round_index=0,
        hard_size=0,
        easy_size=0,
        remedy_size=0,
        advanced_size=0,
        rejected_size=0,
        persistent_transfers=0,
        train_size=len(state.train),
        train_delta=0,
        cumulative_train_size=len(state.cumulative_train_ids),
        val_size=len(state.val),
        level_histogram={},
        subject_histogram={},
        duration_seconds=0.0,
    )
    state.history = list(state.history) + [report]
    checkpoint_save(state, round_dir)
    for name in ("remedy.jsonl", "advanced.jsonl", "rejected.jsonl", "mastered.jsonl", "eval.jsonl"):
        _write_text(round_dir / name, "")
    return report


def run_round(
    state: CurriculumState,
    bundle: BackendBundle,
    settings: RoundSettings,
    run_dir=None,
    clock: Callable[[], float] = time.monotonic,
):
    """One full loop iteration: diagnose, synthesize, evolve, checkpoint.

    Artifacts land in run_dir/round_<t+1>; state is returned unmutated on
    any failure, so the previous checkpoint stays authoritative."""
    started = clock()

    records = evaluate(
        bundle.student,
        bundle.verifier,
        state.val,
        round_index=state.round,
        temperature=settings.temperatures.get("verification", 0.0),
        retries=settings.retries,
        concurrency=settings.concurrency,
    )
    part = partition(state.val, records)

    bumped = update_error_counters(state, part.hard)
    # re-read the hard side so generation prompts and artifacts carry the
    # freshly bumped counters
    hard = ProblemPool(name="hard", problems=(bumped.val.get(i) for i in part.hard.ids()))
    easy = part.easy

    batch = generate_batch(
        hard,
        easy,
        generator=bundle.generator,
        verifier=bundle.verifier,
        round_index=bumped.round + 1,
        fanout=settings.fanout,
        bounds=settings.bounds,
        required_tags=settings.required_tags,
        temperatures=settings.temperatures,
        retries=settings.retries,
        rng_seed=settings.rng_seed,
        concurrency=settings.concurrency,
    )

    part_bumped = Partition(hard=hard, easy=easy)
    new_state = evolve(bumped, part_bumped, batch)

    accepted = ProblemPool(
        name="accepted", problems=list(batch.remedy) + list(batch.advanced)
    )
    dist = distribution_report(accepted)
    stubborn_count = sum(
        1 for p in hard if p.err_count > state.error_threshold
    )
    report = RoundReport(
        round_index=new_state.round,
        hard_size=len(part.hard),
        easy_size=len(part.easy),
        remedy_size=len(batch.remedy),
        advanced_size=len(batch.advanced),
        rejected_size=len(batch.rejected),
        persistent_transfers=stubborn_count,
        train_size=len(new_state.train),
        train_delta=len(new_state.cumulative_train_ids) - len(state.cumulative_train_ids),
        cumulative_train_size=len(new_state.cumulative_train_ids),
        val_size=len(new_state.val),
        level_histogram={k: v for k, v in dist.levels.items() if v},
        subject_histogram={k: v for k, v in dist.subjects.items() if v},
        duration_seconds=round(clock() - started, 6),
    )
    new_state.history = list(state.history) + [report]
    new_state.student_capability = _capability_update(
        new_state, new_state.train, settings
    )
    # keep a synthetic student's live capability in step with the state so
    # the next round sees the post-training model
    if new_state.student_capability is not None and hasattr(bundle.student, "capability"):
        bundle.student.capability = new_state.student_capability

    if run_dir is not None:
        round_dir = Path(run_dir) / f"round_{new_state.round}"
        round_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_save(new_state, round_dir)
        save_pool(batch.remedy, round_dir / "remedy.jsonl")
        save_pool(batch.advanced, round_dir / "advanced.jsonl")
        _write_text(
            round_dir / "rejected.jsonl",
            "".join(r.to_line() + "\n" for r in batch.rejected),
        )
        save_pool(part.easy, round_dir / "mastered.jsonl")
        _write_text(
            round_dir / "eval.jsonl",
            "".join(r.to_line() + "\n" for r in records),
        )
        export_training_set(
            new_state.train, new_state.round, Path(run_dir), settings.config_hash
        )
        if settings.post_round_command:
            export_path = Path(run_dir) / f"sft_round_{new_state.round}.jsonl"
            proc = subprocess.run(
                [*settings.post_round_command, str(export_path)],
                capture_output=True,
                text=True,
            )
            if proc.returncode != 0:
                raise ValidationError(
                    f"post-round command failed with exit {proc.returncode}: "
                    f"{proc.stderr.strip()[:200]}"
                )

    return new_state, report


def run_loop(
    state: CurriculumState,
    bundle: BackendBundle,
    settings: RoundSettings,
    rounds: int,
    run_dir=None,
    clock: Callable[[], float] = time.monotonic,
):
    """Executes up to `rounds` further rounds; stops early on an empty

    validation pool. Returns (final state, reports)."""
    if rounds < 0:
        raise ValidationError(f"rounds must be >= 0, got {rounds}")
    reports = []
    for _ in range(rounds):
        if len(state.val) == 0:
            break
        state, report = run_round(state, bundle, settings, run_dir=run_dir, clock=clock)
        reports.append(report)
    return state, reports
