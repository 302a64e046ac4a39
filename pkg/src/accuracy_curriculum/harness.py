"""Experiment configuration, seeded runs, CSV logging and aggregation.

Random streams
--------------
Each run seed ``s`` spawns four independent generators,
``numpy.random.Generator(PCG64(SeedSequence([s, k])))`` with the fixed labels

====== =  ==========================================================
train  0  network initialization, then replay minibatch sampling
env    1  training-episode start states and targets
eval   2  evaluation start states and targets
sched  3  training-accuracy draws
====== =  ==========================================================

so evaluation cadence and the choice of strategy never shift the other streams.

Output layout under ``<out>/<strategy>/``::

    config.echo                    resolved configuration (JSON)
    runs/seed_<s>/eval.csv         per-run evaluation records
    runs/seed_<s>/samples.csv      per-run training-accuracy draws
    eval.csv, samples.csv          per-run files concatenated in seed order
    aggregate.csv                  mean and std of success_rate over seeds
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import Agent, AgentConfig, train_step
from .curriculum import (CONDITIONING, DEFAULT_ACCURACIES, STRATEGIES, Scheduler,
                         SchedulerConfig, check_accuracy_set, evaluate_competence,
                         next_training_epsilon)
from .env import ArmEnv, EnvParams
from .errors import ConfigError, NumericalDivergence

log = logging.getLogger(__name__)

STREAM_LABELS = {"train": 0, "env": 1, "eval": 2, "sched": 3}

EVAL_COLUMNS = ("run_seed", "step", "epsilon", "success_rate", "cp")
SAMPLE_COLUMNS = ("run_seed", "step", "epsilon")
AGGREGATE_COLUMNS = ("strategy", "step", "epsilon", "mean", "std")

DESK_SCALE = {"total_steps": 150_000, "seeds": (0, 1, 2, 3, 4)}
PAPER_SCALE = {"total_steps": 300_000, "seeds": tuple(range(10))}


def derive_streams(seed: int) -> dict[str, np.random.Generator]:
    return {label: np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), code])))
            for label, code in STREAM_LABELS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "active"
    beta: float = 4.0
    total_steps: int = DESK_SCALE["total_steps"]
    seeds: tuple[int, ...] = DESK_SCALE["seeds"]
    eval_period: int = 1000
    eval_episodes: int = 10
    window_half: int = 3
    conditioning: str = "shared"
    accuracies: tuple[float, ...] = DEFAULT_ACCURACIES
    env: EnvParams = field(default_factory=EnvParams)
    agent: AgentConfig = field(default_factory=AgentConfig)
    out: str = "runs"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"strategy: unknown value {self.strategy!r}; allowed: {', '.join(STRATEGIES)}")
        if self.conditioning not in CONDITIONING:
            raise ConfigError(
                f"conditioning: unknown value {self.conditioning!r}; allowed: {', '.join(CONDITIONING)}")
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds: must be distinct, got {list(self.seeds)}")
        if self.eval_period < 1 or self.total_steps < self.eval_period:
            raise ConfigError(
                f"total_steps ({self.total_steps}) must be >= eval_period ({self.eval_period}) >= 1")
        check_accuracy_set(self.accuracies)
        self.scheduler_config()

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(self.beta, self.window_half, self.eval_period,
                               self.eval_episodes, self.conditioning)

    @property
    def strategy_dir(self) -> Path:
        return Path(self.out) / self.strategy

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        d["accuracies"] = list(self.accuracies)
        d["agent"]["hidden"] = list(self.agent.hidden)
        return d


_TOP_TYPES = {"strategy": str, "beta": float, "total_steps": int, "seeds": "seeds",
              "eval_period": int, "eval_episodes": int, "window_half": int,
              "conditioning": str, "accuracies": "floats", "out": str}


def _coerce(key, value, kind):
    try:
        if kind == "seeds":
            if isinstance(value, int) and not isinstance(value, bool):
                return tuple(range(value))
            return tuple(_coerce(key, v, int) for v in value)
        if kind == "floats":
            return tuple(_coerce(key, v, float) for v in value)
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind == "ints":
            return tuple(_coerce(key, v, int) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}") from None
    raise AssertionError(kind)


def _section(cls, values: dict, prefix: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"{prefix}.{key}: unknown key; allowed: {', '.join(sorted(known))}")
        default = known[key].default
        if key == "hidden":
            kind = "ints"
        elif isinstance(default, bool):
            kind = bool
        elif isinstance(default, int):
            kind = int
        elif isinstance(default, float):
            kind = float
        else:
            kind = str
        kwargs[key] = _coerce(f"{prefix}.{key}", value, kind)
    return cls(**kwargs)


def config_from_dict(values: dict) -> ExperimentConfig:
    """Build a config from a plain mapping, rejecting unknown keys."""
    kwargs = {}
    for key, value in values.items():
        if key == "env":
            kwargs["env"] = _section(EnvParams, value, "env")
        elif key == "agent":
            kwargs["agent"] = _section(AgentConfig, value, "agent")
        elif key in _TOP_TYPES:
            kwargs[key] = _coerce(key, value, _TOP_TYPES[key])
        else:
            allowed = sorted([*_TOP_TYPES, "env", "agent"])
            raise ConfigError(f"{key}: unknown key; allowed: {', '.join(allowed)}")
    return ExperimentConfig(**kwargs)


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            values = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return values


def parse_config(path=None, overrides: dict | None = None, paper_scale: bool = False) -> ExperimentConfig:
    """Resolve a config: defaults, then file, then the paper-scale preset, then flags.

    ``overrides`` holds top-level keys from command-line flags; ``None``
    values mean "not given".
    """
    values = load_config_file(path) if path else {}
    if paper_scale:
        values.update(total_steps=PAPER_SCALE["total_steps"], seeds=list(PAPER_SCALE["seeds"]))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return config_from_dict(values)


@dataclass(frozen=True)
class EvalRecord:
    run_seed: int
    step: int
    epsilon: float
    success_rate: float
    cp: float | None


@dataclass(frozen=True)
class SampleRecord:
    run_seed: int
    step: int
    epsilon: float


def run_single(config: ExperimentConfig, seed: int, progress_every: int = 10):
    """Train one agent for ``config.total_steps`` and return its records.

    Evaluates all accuracy levels every ``eval_period`` steps and records the
    accuracy drawn for every training episode.
    """
    streams = derive_streams(seed)
    acc = tuple(config.accuracies)
    agent = Agent.create(config.agent, streams["train"], acc)
    env = ArmEnv(config.env, streams["env"])
    sched = Scheduler(config.strategy, config.scheduler_config(), acc)
    policy = agent.policy
    evals: list[EvalRecord] = []
    samples: list[SampleRecord] = []
    epsilon = None
    started = time.perf_counter()
    for step in range(config.total_steps):
        try:
            if env.state is None or env.done:
                epsilon = next_training_epsilon(sched, rng=streams["sched"])
                env.reset()
                samples.append(SampleRecord(seed, step, epsilon))
            train_step(agent, env, epsilon, streams["train"])
            done = step + 1
            if done % config.eval_period == 0:
                scores = evaluate_competence(policy, config.env, acc, config.eval_episodes,
                                             streams["eval"], config.conditioning)
        except NumericalDivergence as exc:
            raise NumericalDivergence(f"seed {seed}: diverged at step {step}: {exc}", step) from exc
        if done % config.eval_period == 0:
            progress = sched.record(done, scores)
            evals.extend(EvalRecord(seed, done, e, s, cp)
                         for e, s, cp in zip(acc, scores, progress))
            n_evals = done // config.eval_period
            if progress_every and n_evals % progress_every == 0:
                log.info("%s seed=%d step=%d scores=%s (%.0fs)", config.strategy, seed, done,
                         " ".join(f"{s:.1f}" for s in scores), time.perf_counter() - started)
    return evals, samples


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".9g")


def write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def eval_rows(records):
    return [(r.run_seed, r.step, r.epsilon, r.success_rate, r.cp) for r in records]


def sample_rows(records):
    return [(r.run_seed, r.step, r.epsilon) for r in records]


class CSVFormatError(ValueError):
    def __init__(self, path, row, message):
        super().__init__(f"{path}: row {row}: {message}")
        self.path = path
        self.row = row


def read_csv(path, columns, types):
    """Parse a CSV written by :func:`write_csv`; empty fields become ``None``.

    Row numbers in errors count the header as row 1.
    """
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise CSVFormatError(path, 1, f"expected header {','.join(columns)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise CSVFormatError(path, lineno, f"expected {len(columns)} fields, got {len(row)}")
            parsed = []
            for name, value, kind in zip(columns, row, types):
                if value == "" and kind is not str:
                    parsed.append(None)
                    continue
                try:
                    parsed.append(kind(value))
                except ValueError:
                    raise CSVFormatError(path, lineno, f"bad {name} value {value!r}") from None
            out.append(tuple(parsed))
    return out


def read_eval_csv(path):
    return [EvalRecord(*r) for r in read_csv(path, EVAL_COLUMNS, (int, int, float, float, float))]


def read_samples_csv(path):
    return [SampleRecord(*r) for r in read_csv(path, SAMPLE_COLUMNS, (int, int, float))]


def read_aggregate_csv(path):
    return read_csv(path, AGGREGATE_COLUMNS, (str, int, float, float, float))


def aggregate(strategy: str, records) -> list[tuple]:
    """Mean and population std of success_rate over seeds per (step, epsilon)."""
    groups: dict[tuple[int, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.step, r.epsilon), []).append(r.success_rate)
    rows = []
    for (step, eps) in sorted(groups):
        vals = np.array(groups[(step, eps)])
        rows.append((strategy, step, eps, float(vals.mean()), float(vals.std())))
    return rows


@dataclass
class SuiteResult:
    config: ExperimentConfig
    evals: list
    samples: list
    failures: dict = field(default_factory=dict)
    directory: Path | None = None


def _run_seed(args):
    config, seed = args
    try:
        return seed, run_single(config, seed), None
    except NumericalDivergence as exc:
        return seed, None, exc


def run_suite(config: ExperimentConfig, jobs: int = 1) -> SuiteResult:
    """Run every seed, write per-run and merged CSVs plus the aggregate."""
    root = config.strategy_dir
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.echo").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    tasks = [(config, s) for s in config.seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_seed, tasks))
    else:
        outcomes = [_run_seed(t) for t in tasks]

    result = SuiteResult(config, [], [], directory=root)
    for seed, records, exc in outcomes:
        if exc is not None:
            log.warning("run with seed %d failed: %s", seed, exc)
            result.failures[seed] = exc
            continue
        evals, samples = records
        run_dir = root / "runs" / f"seed_{seed}"
        write_csv(run_dir / "eval.csv", EVAL_COLUMNS, eval_rows(evals))
        write_csv(run_dir / "samples.csv", SAMPLE_COLUMNS, sample_rows(samples))
        result.evals.extend(evals)
        result.samples.extend(samples)
    if result.failures:
        log.warning("aggregating over %d of %d runs", len(config.seeds) - len(result.failures),
                    len(config.seeds))
    write_csv(root / "eval.csv", EVAL_COLUMNS, eval_rows(result.evals))
    write_csv(root / "samples.csv", SAMPLE_COLUMNS, sample_rows(result.samples))
    write_csv(root / "aggregate.csv", AGGREGATE_COLUMNS, aggregate(config.strategy, result.evals))
    return result


def find_strategy_dirs(paths) -> list[Path]:
    """Directories holding an ``eval.csv``, searching one level below each path."""
    found = []
    for p in map(Path, paths):
        if (p / "eval.csv").is_file():
            found.append(p)
        elif p.is_dir():
            found.extend(sorted(d for d in p.iterdir() if (d / "eval.csv").is_file()))
    return found


def load_strategy_dir(path) -> tuple[str, list, list]:
    """Return ``(strategy, eval records, sample records)`` from a strategy directory."""
    path = Path(path)
    strategy = path.name
    echo = path / "config.echo"
    if echo.is_file():
        strategy = json.loads(echo.read_text()).get("strategy", strategy)
    samples_path = path / "samples.csv"
    samples = read_samples_csv(samples_path) if samples_path.is_file() else []
    return strategy, read_eval_csv(path / "eval.csv"), samples

