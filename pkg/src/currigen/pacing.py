"""Numerical model of training pace.

The per-sample learning signal is modeled as g(d) = A * d * exp(-d/c): zero
for trivial problems, peaked exactly at the student's capability c, decaying
for problems far beyond it. A pacing policy decides which difficulties to
draw each round; capability then grows with the mean signal and a risk proxy
shrinks with its square, realizing one step of gradient descent per round.

Everything here is a pure function of (config, policy, seed).
"""
from __future__ import annotations

import csv
import json
import math
import random
import statistics
from dataclasses import dataclass
from typing import Optional

from currigen.errors import StorageError, ValidationError


def gradient_proxy(d: float, c: float, A: float = 1.0) -> float:
    if c <= 0:
        raise ValidationError(f"capability must be positive, got {c}")
    if d < 0:
        raise ValidationError(f"difficulty must be non-negative, got {d}")
    if A <= 0:
        raise ValidationError(f"amplitude must be positive, got {A}")
    return A * d * math.exp(-d / c)


def gradient_proxy_derivative(d: float, c: float, A: float = 1.0) -> float:
    if c <= 0:
        raise ValidationError(f"capability must be positive, got {c}")
    if d < 0:
        raise ValidationError(f"difficulty must be non-negative, got {d}")
    if A <= 0:
        raise ValidationError(f"amplitude must be positive, got {A}")
    return A * math.exp(-d / c) * (1.0 - d / c)


def optimal_difficulty(c: float) -> float:
    """The argmax of the signal: learning is fastest right at capability."""
    if c <= 0:
        raise ValidationError(f"capability must be positive, got {c}")
    return c


@dataclass(frozen=True)
class PacingConfig:
    amplitude: float = 1.0
    epsilon: float = 0.5
    eta: float = 0.2
    delta: Optional[float] = None
    c0: float = 1.0
    target: float = 8.0
    max_rounds: int = 500
    scale_max: float = 10.0
    batch_size: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValidationError(f"amplitude must be > 0, got {self.amplitude}")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.eta < 0:
            raise ValidationError(f"eta must be >= 0, got {self.eta}")
        if self.delta is not None and self.delta < 0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")
        if self.c0 <= 0:
            raise ValidationError(f"c0 must be > 0, got {self.c0}")
        if not isinstance(self.max_rounds, int) or self.max_rounds < 0:
            raise ValidationError(f"max_rounds must be an integer >= 0, got {self.max_rounds!r}")
        if self.scale_max <= 0:
            raise ValidationError(f"scale_max must be > 0, got {self.scale_max}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ValidationError(f"batch_size must be an integer >= 1, got {self.batch_size!r}")

    def resolved_delta(self) -> float:
        # default tolerance: 5% of the peak signal at the starting capability
        if self.delta is not None:
            return self.delta
        return 0.05 * gradient_proxy(self.c0, self.c0, self.amplitude)


class BidirectionalPolicy:
    """Draws difficulty uniformly from the band around current capability,

    clipped below at zero: remediation below c, expansion above it."""

    name = "bidirectional"

    def __init__(self, epsilon: float):
        if epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
        self.epsilon = epsilon

    def sample(self, c: float, round_index: int, rng: random.Random) -> float:
        lo = max(0.0, c - self.epsilon)
        hi = c + self.epsilon
        if hi <= lo:
            return c
        return rng.uniform(lo, hi)


class UnidirectionalPolicy:
    """Monotone difficulty ramp fixed in advance, blind to capability."""

    name = "unidirectional"

    def __init__(self, start: float, scale_max: float, max_rounds: int):
        self.start = start
        self.scale_max = scale_max
        self.max_rounds = max(1, max_rounds)

    def sample(self, c: float, round_index: int, rng: random.Random) -> float:
        step = (self.scale_max - self.start) / self.max_rounds
        return min(self.scale_max, self.start + round_index * step)


class StaticPolicy:
    name = "static"

    def __init__(self, difficulty: float):
        if difficulty < 0:
            raise ValidationError(f"difficulty must be >= 0, got {difficulty}")
        self.difficulty = difficulty
        self.name = f"static({difficulty:g})"

    def sample(self, c: float, round_index: int, rng: random.Random) -> float:
        return self.difficulty


class RandomPolicy:
    name = "random"

    def __init__(self, scale_max: float):
        self.scale_max = scale_max

    def sample(self, c: float, round_index: int, rng: random.Random) -> float:
        return rng.uniform(0.0, self.scale_max)


def default_policies(config: PacingConfig) -> list:
    """The comparison set: adaptive band, blind ramp, fixed far target,

    and uniform noise."""
    return [
        BidirectionalPolicy(config.epsilon),
        UnidirectionalPolicy(config.c0, config.scale_max, config.max_rounds),
        StaticPolicy(config.scale_max),
        RandomPolicy(config.scale_max),
    ]


def make_policy(spec, config: PacingConfig):
    """Builds one policy from a name or a {name, params} mapping."""
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ValidationError(f"policy spec must be a name or mapping with 'name': {spec!r}")
    name = spec["name"]
    if name == "bidirectional":
        return BidirectionalPolicy(spec.get("epsilon", config.epsilon))
    if name == "unidirectional":
        return UnidirectionalPolicy(
            spec.get("start", config.c0), config.scale_max, config.max_rounds
        )
    if name == "static":
        return StaticPolicy(spec.get("difficulty", config.scale_max))
    if name == "random":
        return RandomPolicy(config.scale_max)
    raise ValidationError(f"unknown policy: {name!r}")


@dataclass(frozen=True)
class Trajectory:
    policy_name: str
    c0: float
    capability: tuple  # c_t after each executed round
    difficulties: tuple  # per-round tuple of sampled d_i
    mean_g: tuple
    risk: tuple
    rounds_to_target: Optional[int]

    def rounds_executed(self) -> int:
        return len(self.capability)


def simulate(
    config: PacingConfig, policy, batch_size: Optional[int] = None, rng_seed=None
) -> Trajectory:
    """Runs one trajectory until capability reaches the target or the round

    budget runs out. Risk follows one descent step per round, floored at 0."""
    batch = batch_size if batch_size is not None else config.batch_size
    if batch < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch}")
    seed = config.rng_seed if rng_seed is None else rng_seed
    rng = random.Random(f"pacing:{seed}")
    c = config.c0
    risk = 1.0
    caps, diffs, means, risks = [], [], [], []
    rounds = 0
    while c < config.target and rounds < config.max_rounds:
        ds = [policy.sample(c, rounds, rng) for _ in range(batch)]
        gs = [gradient_proxy(d, c, config.amplitude) for d in ds]
        mean_g = math.fsum(gs) / batch
        c = c + config.eta * mean_g
        risk = max(0.0, risk - config.eta * (math.fsum(g * g for g in gs) / batch))
        rounds += 1
        caps.append(c)
        diffs.append(tuple(ds))
        means.append(mean_g)
        risks.append(risk)
    return Trajectory(
        policy_name=policy.name,
        c0=config.c0,
        capability=tuple(caps),
        difficulties=tuple(diffs),
        mean_g=tuple(means),
        risk=tuple(risks),
        rounds_to_target=rounds if c >= config.target else None,
    )


@dataclass(frozen=True)
class PolicyStats:
    name: str
    mean_rounds: float
    median_rounds: float
    reached_target: int
    trials: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean_rounds": self.mean_rounds,
            "median_rounds": self.median_rounds,
            "reached_target": self.reached_target,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class ComparisonSummary:
    trials: int
    stats: tuple  # PolicyStats, in policy order
    win_matrix: dict  # name -> name -> wins (strictly fewer rounds)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "policies": [s.to_dict() for s in self.stats],
            "win_matrix": self.win_matrix,
        }

    def best(self) -> PolicyStats:
        return min(self.stats, key=lambda s: s.mean_rounds)


def compare_policies(
    config: PacingConfig, policies, trials: int
) -> tuple:
    """Paired trials: every policy sees the same per-trial seed. A run that

    never reaches the target counts as the full round budget.

    Returns (summary, trajectories) with trajectories[policy][trial]."""
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise ValidationError(f"policy names must be unique: {names}")
    trajectories = {p.name: [] for p in policies}
    rounds_taken = {p.name: [] for p in policies}
    for trial in range(trials):
        trial_seed = f"{config.rng_seed}:{trial}"
        for policy in policies:
            traj = simulate(config, policy, rng_seed=trial_seed)
            trajectories[policy.name].append(traj)
            taken = traj.rounds_to_target
            rounds_taken[policy.name].append(
                taken if taken is not None else config.max_rounds
            )
    stats = []
    for policy in policies:
        taken = rounds_taken[policy.name]
        reached = sum(
            1 for t in trajectories[policy.name] if t.rounds_to_target is not None
        )
        stats.append(
            PolicyStats(
                name=policy.name,
                mean_rounds=math.fsum(taken) / trials,
                median_rounds=float(statistics.median(taken)),
                reached_target=reached,
                trials=trials,
            )
        )
    win_matrix = {}
    for a in policies:
        row = {}
        for b in policies:
            if a.name == b.name:
                continue
            row[b.name] = sum(
                1
                for x, y in zip(rounds_taken[a.name], rounds_taken[b.name])
                if x < y
            )
        win_matrix[a.name] = row
    return ComparisonSummary(trials=trials, stats=tuple(stats), win_matrix=win_matrix), trajectories


def trajectory_rows(trajectory: Trajectory, trial: int = 0) -> list:
    rows = []
    for t in range(trajectory.rounds_executed()):
        rows.append(
            (
                trial,
                t,
                f"{trajectory.capability[t]:.10g}",
                f"{trajectory.mean_g[t]:.10g}",
                f"{trajectory.risk[t]:.10g}",
            )
        )
    return rows


CSV_HEADER = ("trial", "round", "c_t", "mean_g", "R_t")


def write_rounds_csv(path, rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
    except OSError as exc:
        raise StorageError(str(path), f"cannot write CSV: {exc}") from exc


def write_summary_json(path, summary: ComparisonSummary) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary.to_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(str(path), f"cannot write summary: {exc}") from exc
