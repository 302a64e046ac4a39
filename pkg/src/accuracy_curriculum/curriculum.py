"""Competence measurement and training-accuracy selection.

Three strategies choose the required accuracy of each training episode:

* ``baseline`` always trains on the tightest accuracy;
* ``random`` draws uniformly from the accuracy set;
* ``active`` draws accuracy ``i`` with probability ``cp_i**beta / sum_k cp_k**beta``,
  where ``cp_i`` is the recent absolute change in measured competence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import BatchArm, EnvParams, reset
from .errors import ConfigError

DEFAULT_ACCURACIES = (0.02, 0.03, 0.04, 0.05)
STRATEGIES = ("baseline", "random", "active")
CONDITIONING = ("shared", "per-accuracy")


def check_accuracy_set(accuracies) -> tuple[float, ...]:
    acc = tuple(float(a) for a in accuracies)
    if not acc:
        raise ConfigError("accuracy set is empty")
    if any(a <= 0 for a in acc) or any(b <= a for a, b in zip(acc, acc[1:])):
        raise ConfigError(f"accuracy set must be positive and strictly increasing, got {acc}")
    return acc


@dataclass(frozen=True)
class SchedulerConfig:
    beta: float = 4.0
    window_half: int = 3
    eval_period: int = 1000
    eval_episodes: int = 10
    conditioning: str = "shared"

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError(f"beta must be a finite real >= 0, got {self.beta}")
        for name in ("window_half", "eval_period", "eval_episodes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.conditioning not in CONDITIONING:
            raise ConfigError(
                f"conditioning must be one of {', '.join(CONDITIONING)}, got {self.conditioning!r}")


@dataclass
class CompetenceHistory:
    """Scores of every accuracy level, measured together at increasing steps."""

    n_levels: int
    steps: list[int] = field(default_factory=list)
    scores: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.scores:
            self.scores = [[] for _ in range(self.n_levels)]

    def __len__(self):
        return len(self.steps)

    def add(self, step: int, scores) -> None:
        if len(scores) != self.n_levels:
            raise ValueError(f"expected {self.n_levels} scores, got {len(scores)}")
        if self.steps and step <= self.steps[-1]:
            raise ValueError(f"measurement step {step} is not after {self.steps[-1]}")
        for s in scores:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"competence score {s} outside [0, 1]")
        self.steps.append(int(step))
        for series, s in zip(self.scores, scores):
            series.append(float(s))


def competence_progress(scores, window_half: int) -> float | None:
    """|sum of the last N scores - sum of the N before| / 2N; ``None`` if fewer than 2N."""
    n = int(window_half)
    if len(scores) < 2 * n:
        return None
    recent = sum(scores[len(scores) - n:])
    older = sum(scores[len(scores) - 2 * n:len(scores) - n])
    return abs(recent - older) / (2 * n)


def history_progress(history: CompetenceHistory, window_half: int) -> list[float | None]:
    return [competence_progress(series, window_half) for series in history.scores]


def sampling_probabilities(progress, beta: float) -> np.ndarray:
    """Power-proportional probabilities with a uniform fallback.

    Falls back to uniform when any entry is unavailable (``None``) or every
    weight is zero. ``0 ** 0`` is taken as 1, so ``beta == 0`` is uniform.
    """
    n = len(progress)
    if any(cp is None for cp in progress):
        return np.full(n, 1.0 / n)
    cp = np.asarray(progress, dtype=np.float64)
    if not np.isfinite(cp).all() or (cp < 0).any():
        raise ValueError(f"competence progress must be finite and >= 0, got {progress}")
    top = cp.max()
    if beta == 0 or top == 0:
        return np.full(n, 1.0 / n)
    # dividing by the max keeps the powers in [0, 1] and leaves the ratios unchanged
    w = (cp / top) ** beta
    return w / w.sum()


def sample_epsilon(progress, beta: float, rng: np.random.Generator,
                   accuracies=DEFAULT_ACCURACIES) -> float:
    p = sampling_probabilities(progress, beta)
    if len(p) != len(accuracies):
        raise ValueError(f"{len(p)} progress values for {len(accuracies)} accuracy levels")
    return float(accuracies[_draw(p, rng)])


def sample_epsilons(progress, beta: float, rng: np.random.Generator, size: int,
                    accuracies=DEFAULT_ACCURACIES) -> np.ndarray:
    """``size`` independent draws; consumes the stream exactly as ``size`` calls of
    :func:`sample_epsilon` would."""
    p = sampling_probabilities(progress, beta)
    if len(p) != len(accuracies):
        raise ValueError(f"{len(p)} progress values for {len(accuracies)} accuracy levels")
    return np.asarray(accuracies, dtype=np.float64)[_draw_many(p, rng.random(size))]


def _draw_many(p, u):
    return np.minimum(np.searchsorted(np.cumsum(p), u, side="right"), len(p) - 1)


def _draw(p, rng):
    return int(_draw_many(p, rng.random()))


class Scheduler:
    """Per-run curriculum state: competence history plus the strategy's sampler."""

    def __init__(self, strategy: str, config: SchedulerConfig | None = None,
                 accuracies=DEFAULT_ACCURACIES):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; allowed: {', '.join(STRATEGIES)}")
        self.strategy = strategy
        self.config = config or SchedulerConfig()
        self.accuracies = check_accuracy_set(accuracies)
        self.history = CompetenceHistory(len(self.accuracies))
        self.progress: list[float | None] = [None] * len(self.accuracies)

    def record(self, step: int, scores) -> list[float | None]:
        self.history.add(step, scores)
        self.progress = history_progress(self.history, self.config.window_half)
        return self.progress

    def probabilities(self) -> np.ndarray:
        n = len(self.accuracies)
        if self.strategy == "baseline":
            p = np.zeros(n)
            p[0] = 1.0
            return p
        if self.strategy == "random":
            return np.full(n, 1.0 / n)
        return sampling_probabilities(self.progress, self.config.beta)


def next_training_epsilon(scheduler: Scheduler, strategy: str | None = None,
                          rng: np.random.Generator | None = None) -> float:
    """Accuracy for the next training episode.

    ``strategy`` defaults to the scheduler's own. The baseline never draws from
    ``rng``; the other strategies draw exactly one uniform variate per call.
    """
    strategy = strategy or scheduler.strategy
    acc = scheduler.accuracies
    if strategy == "baseline":
        return acc[0]
    if rng is None:
        raise ValueError(f"strategy {strategy!r} needs a random stream")
    if strategy == "random":
        return acc[_draw(np.full(len(acc), 1.0 / len(acc)), rng)]
    if strategy == "active":
        return sample_epsilon(scheduler.progress, scheduler.config.beta, rng, acc)
    raise ConfigError(f"unknown strategy {strategy!r}; allowed: {', '.join(STRATEGIES)}")


def evaluate_competence(policy, params: EnvParams, accuracies, eval_episodes: int,
                        rng: np.random.Generator, conditioning: str = "shared",
                        horizon: int | None = None) -> list[float]:
    """Fraction of greedy episodes solved at each accuracy level.

    ``policy`` maps an ``(n, 11)`` observation batch to ``(n, 2)`` actions.
    Every level is scored on the same ``eval_episodes`` start states and
    targets, drawn from ``rng``. With ``shared`` conditioning one rollout per
    episode is run with the tightest accuracy in the observation, and an
    episode counts as solved at level ``e`` if its fingertip came within
    ``e`` of the target before the rollout ended; scores are therefore
    non-decreasing in ``e``. With ``per-accuracy`` conditioning each level
    gets its own rollout with that level in the observation.
    """
    accuracies = check_accuracy_set(accuracies)
    horizon = horizon or params.horizon
    starts = [reset(rng, params) for _ in range(eval_episodes)]
    if conditioning == "shared":
        min_dist = _rollout_min_distance(policy, starts, params, accuracies[0], horizon)
        return [float(np.mean(min_dist <= e)) for e in accuracies]
    if conditioning == "per-accuracy":
        return [float(np.mean(_rollout_min_distance(policy, starts, params, e, horizon) <= e))
                for e in accuracies]
    raise ConfigError(f"unknown conditioning {conditioning!r}")


def _rollout_min_distance(policy, starts, params, epsilon, horizon):
    arms = BatchArm(starts, params)
    min_dist = np.full(len(arms), np.inf)
    active = np.ones(len(arms), dtype=bool)
    for _ in range(horizon):
        dist = arms.step(policy(arms.observe(epsilon)))
        np.minimum(min_dist, np.where(active, dist, np.inf), out=min_dist)
        active &= dist > epsilon
        if not active.any():
            break
    return min_dist
