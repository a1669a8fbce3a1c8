"""One function per operator action. The HTTP service and the CLI are both

thin shells over these; everything returns plain JSON-ready dicts."""
from __future__ import annotations

import csv
import re
import time
from pathlib import Path
from typing import Optional

from currigen import curriculum, pacing
from currigen.config import (
    RunConfig,
    build_agent_backend,
    build_student,
    config_hash,
)
from currigen.dataset import (
    SubjectCategory,
    distribution_report,
    load_pool,
    save_pool,
    stratified_seed_sample,
)
from currigen.diagnostics import evaluate, partition
from currigen.errors import StorageError, ValidationError
from currigen.generation import DifficultyBounds, generate_batch, tag_pool
from currigen.curriculum import (
    BackendBundle,
    RoundSettings,
    checkpoint_load,
    export_training_set,
    init_run,
    run_loop,
    run_round,
    seed_state,
)


def _clock(config: RunConfig):
    return (lambda: 0.0) if config.timing_is_deterministic() else time.monotonic


def _settings(config: RunConfig) -> RoundSettings:
    return RoundSettings(
        fanout=dict(config.fanout),
        bounds=DifficultyBounds(epsilon=config.bounds.epsilon, tau=config.bounds.tau),
        required_tags=tuple(config.required_tags),
        temperatures=config.temperatures.model_dump(),
        retries=config.retries,
        rng_seed=config.rng_seed,
        concurrency=config.concurrency,
        train_on_seed_round0=config.train_on_seed_round0,
        config_hash=config_hash(config),
        post_round_command=config.post_round_command,
        synthetic_eta=config.pacing.eta,
        pacing_amplitude=config.pacing.amplitude,
    )


def _bundle(config: RunConfig, capability: Optional[float] = None) -> BackendBundle:
    return BackendBundle(
        student=build_student(config.student, config.rng_seed, capability=capability),
        generator=build_agent_backend(config.generator),
        verifier=build_agent_backend(config.verifier),
    )


def _round_dirs(run_dir: Path) -> list:
    out = []
    if not run_dir.is_dir():
        return out
    for entry in run_dir.iterdir():
        m = re.fullmatch(r"round_(\d+)", entry.name)
        if m and (entry / "state.json").is_file():
            out.append((int(m.group(1)), entry))
    return sorted(out)


def latest_checkpoint(run_dir) -> tuple:
    """Returns (state, directory) for the highest checkpointed round."""
    rounds = _round_dirs(Path(run_dir))
    if not rounds:
        raise StorageError(str(run_dir), "no round checkpoints found; seed the run first")
    index, directory = rounds[-1]
    state = checkpoint_load(directory)
    if state.round != index:
        raise ValidationError(
            f"checkpoint {directory} claims round {state.round}, directory says {index}"
        )
    return state, directory


def op_seed(config: RunConfig) -> dict:
    if not config.corpus_path:
        raise ValidationError("seed requires corpus_path in the config")
    corpus = load_pool(config.corpus_path, name="corpus")
    generator = build_agent_backend(config.generator)
    tagged = tag_pool(
        corpus,
        generator,
        temperature=config.temperatures.tagging,
        retries=config.retries,
        concurrency=config.concurrency,
    )
    quota = {SubjectCategory.parse(k): v for k, v in config.quota.items()}
    seed = stratified_seed_sample(tagged, quota, config.rng_seed)
    capability = config.student.capability if config.student.kind == "synthetic" else None
    state = seed_state(seed, config.error_threshold, student_capability=capability)
    run_dir = Path(config.run_dir)
    report = init_run(state, run_dir, clock=_clock(config))
    if config.train_on_seed_round0:
        # the round-0 model is trained on the seed itself; later rounds
        # train only on synthesized material
        export_training_set(state.val, 0, run_dir, config_hash(config))
    dist = distribution_report(state.val)
    return {
        "run_dir": str(run_dir),
        "val_size": len(state.val),
        "subjects": dist.subjects,
        "levels": dist.levels,
        "report": report.to_dict(),
    }


def op_tag(config: RunConfig, pool_path: str, out_path: str) -> dict:
    pool = load_pool(pool_path)
    generator = build_agent_backend(config.generator)
    tagged = tag_pool(
        pool,
        generator,
        temperature=config.temperatures.tagging,
        retries=config.retries,
        concurrency=config.concurrency,
    )
    save_pool(tagged, out_path)
    dist = distribution_report(tagged)
    return {
        "pool_path": str(pool_path),
        "out_path": str(out_path),
        "total": dist.total,
        "subjects": dist.subjects,
        "levels": dist.levels,
    }


def op_eval(config: RunConfig) -> dict:
    """Diagnostics only: no state advances, artifacts go to adhoc/."""
    state, _ = latest_checkpoint(config.run_dir)
    bundle = _bundle(config, capability=state.student_capability)
    records = evaluate(
        bundle.student,
        bundle.verifier,
        state.val,
        round_index=state.round,
        temperature=config.temperatures.verification,
        retries=config.retries,
        concurrency=config.concurrency,
    )
    part = partition(state.val, records)
    adhoc = Path(config.run_dir) / "adhoc"
    adhoc.mkdir(parents=True, exist_ok=True)
    eval_path = adhoc / "eval.jsonl"
    curriculum._write_text(
        eval_path, "".join(r.to_line() + "\n" for r in records)
    )
    return {
        "round": state.round,
        "val_size": len(state.val),
        "hard_size": len(part.hard),
        "easy_size": len(part.easy),
        "eval_path": str(eval_path),
    }


def op_generate(config: RunConfig) -> dict:
    """Diagnostics plus synthesis, without evolving the checkpoint."""
    state, _ = latest_checkpoint(config.run_dir)
    bundle = _bundle(config, capability=state.student_capability)
    settings = _settings(config)
    records = evaluate(
        bundle.student,
        bundle.verifier,
        state.val,
        round_index=state.round,
        temperature=config.temperatures.verification,
        retries=config.retries,
        concurrency=config.concurrency,
    )
    part = partition(state.val, records)
    batch = generate_batch(
        part.hard,
        part.easy,
        generator=bundle.generator,
        verifier=bundle.verifier,
        round_index=state.round + 1,
        fanout=settings.fanout,
        bounds=settings.bounds,
        required_tags=settings.required_tags,
        temperatures=settings.temperatures,
        retries=settings.retries,
        rng_seed=settings.rng_seed,
        concurrency=settings.concurrency,
    )
    adhoc = Path(config.run_dir) / "adhoc"
    adhoc.mkdir(parents=True, exist_ok=True)
    save_pool(batch.remedy, adhoc / "remedy.jsonl")
    save_pool(batch.advanced, adhoc / "advanced.jsonl")
    curriculum._write_text(
        adhoc / "rejected.jsonl",
        "".join(r.to_line() + "\n" for r in batch.rejected),
    )
    return {
        "round": state.round,
        "hard_size": len(part.hard),
        "easy_size": len(part.easy),
        "remedy_size": len(batch.remedy),
        "advanced_size": len(batch.advanced),
        "rejected_size": len(batch.rejected),
        "out_dir": str(adhoc),
    }


def op_evolve(config: RunConfig) -> dict:
    """Exactly one full round, checkpointed."""
    state, _ = latest_checkpoint(config.run_dir)
    bundle = _bundle(config, capability=state.student_capability)
    new_state, report = run_round(
        state, bundle, _settings(config), run_dir=config.run_dir, clock=_clock(config)
    )
    return {"round": new_state.round, "report": report.to_dict()}


def op_run(config: RunConfig, resume: bool = False) -> dict:
    """Advances the run to `rounds` total rounds from the last checkpoint.

    A directory that already holds progress needs resume=True, so nobody
    extends a half-finished run by accident; resuming restarts cleanly
    from the last good checkpoint."""
    state, _ = latest_checkpoint(config.run_dir)
    if state.round > 0 and not resume:
        raise ValidationError(
            f"run directory already holds {state.round} completed round(s); "
            "pass --resume to continue from the latest checkpoint"
        )
    remaining = max(0, config.rounds - state.round)
    bundle = _bundle(config, capability=state.student_capability)
    final_state, reports = run_loop(
        state,
        bundle,
        _settings(config),
        rounds=remaining,
        run_dir=config.run_dir,
        clock=_clock(config),
    )
    return {
        "round": final_state.round,
        "rounds_executed": len(reports),
        "train_size": len(final_state.train),
        "val_size": len(final_state.val),
        "cumulative_train_size": len(final_state.cumulative_train_ids),
        "student_capability": final_state.student_capability,
        "reports": [r.to_dict() for r in reports],
    }


def _policy_filename(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "policy"


def op_simulate(config: RunConfig) -> dict:
    spec = config.pacing
    pconfig = pacing.PacingConfig(
        amplitude=spec.amplitude,
        epsilon=spec.epsilon,
        eta=spec.eta,
        delta=spec.delta,
        c0=spec.c0,
        target=spec.target,
        max_rounds=spec.max_rounds,
        scale_max=spec.scale_max,
        batch_size=spec.batch_size,
        rng_seed=config.rng_seed,
    )
    policies = [pacing.make_policy(p, pconfig) for p in spec.policies]
    summary, trajectories = pacing.compare_policies(pconfig, policies, spec.trials)
    out_dir = Path(config.run_dir) / "pacing"
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for policy in policies:
        rows = []
        for trial, traj in enumerate(trajectories[policy.name]):
            rows.extend(pacing.trajectory_rows(traj, trial))
        path = out_dir / f"{_policy_filename(policy.name)}.csv"
        pacing.write_rounds_csv(path, rows)
        files[policy.name] = str(path)
    summary_path = out_dir / "summary.json"
    pacing.write_summary_json(summary_path, summary)
    return {
        "summary": summary.to_dict(),
        "summary_path": str(summary_path),
        "csv_paths": files,
    }


def op_report(config: RunConfig) -> dict:
    """Aggregates the run's history into a round table plus cumulative

    difficulty/subject histograms (seed pool + every retained batch)."""
    state, directory = latest_checkpoint(config.run_dir)
    run_dir = Path(config.run_dir)
    seed_val = load_pool(run_dir / "round_0" / "val.jsonl", name="seed")
    seed_dist = distribution_report(seed_val)

    levels = {str(k): 0 for k in range(1, 11)}
    levels["untagged"] = 0
    subjects = {s.value: 0 for s in SubjectCategory}
    subjects["untagged"] = 0
    for key, count in seed_dist.levels.items():
        levels[key] += count
    for key, count in seed_dist.subjects.items():
        subjects[key] += count
    generated_total = 0
    for report in state.history:
        for key, count in report.level_histogram.items():
            levels[key] = levels.get(key, 0) + count
        for key, count in report.subject_histogram.items():
            subjects[key] = subjects.get(key, 0) + count
        generated_total += report.remedy_size + report.advanced_size

    table = [r.to_dict() for r in state.history]
    report_dir = run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    round_rows = [
        (
            r["round_index"], r["hard_size"], r["easy_size"], r["remedy_size"],
            r["advanced_size"], r["rejected_size"], r["persistent_transfers"],
            r["train_size"], r["cumulative_train_size"], r["val_size"],
        )
        for r in table
    ]
    _write_csv(
        report_dir / "rounds.csv",
        ("round", "hard", "easy", "remedy", "advanced", "rejected",
         "transfers", "train", "cumulative_train", "val"),
        round_rows,
    )
    _write_csv(
        report_dir / "levels.csv",
        ("level", "count"),
        sorted(levels.items(), key=_level_key),
    )
    _write_csv(
        report_dir / "subjects.csv",
        ("subject", "count"),
        list(subjects.items()),
    )
    text = _report_text(table, levels, subjects)
    curriculum._write_text(report_dir / "summary.txt", text)
    return {
        "rounds": table,
        "levels": levels,
        "subjects": subjects,
        "generated_total": generated_total,
        "seed_size": len(seed_val),
        "report_dir": str(report_dir),
        "text": text,
    }


def _level_key(item):
    key = item[0]
    return (0, int(key)) if key.isdigit() else (1, 0)


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise StorageError(str(path), f"cannot write CSV: {exc}") from exc


def _report_text(table, levels, subjects) -> str:
    lines = ["round  hard  easy  remedy  advanced  train  cum_train  val"]
    for r in table:
        lines.append(
            f"{r['round_index']:>5}  {r['hard_size']:>4}  {r['easy_size']:>4}  "
            f"{r['remedy_size']:>6}  {r['advanced_size']:>8}  {r['train_size']:>5}  "
            f"{r['cumulative_train_size']:>9}  {r['val_size']:>3}"
        )
    lines.append("")
    lines.append("levels: " + ", ".join(
        f"{k}={v}" for k, v in sorted(levels.items(), key=_level_key) if v
    ))
    lines.append("subjects: " + ", ".join(f"{k}={v}" for k, v in subjects.items() if v))
    lines.append("")
    return "\n".join(lines)
