import numpy as np
import pytest

from accuracy_curriculum.agent import AgentConfig
from accuracy_curriculum.env import OMEGA_MAX, EnvParams
from accuracy_curriculum.harness import ExperimentConfig


def ik_policy(obs, params=EnvParams(), kp=8.0, kd=0.8):
    """PD control toward the elbow-down inverse-kinematics solution of the target."""
    th1 = np.arctan2(obs[:, 1], obs[:, 0])
    th2 = np.arctan2(obs[:, 3], obs[:, 2])
    w = obs[:, 4:6] * OMEGA_MAX
    tx, ty = obs[:, 8], obs[:, 9]
    c2 = (tx ** 2 + ty ** 2 - params.l1 ** 2 - params.l2 ** 2) / (2 * params.l1 * params.l2)
    d2 = np.arccos(np.clip(c2, -1, 1))
    d1 = np.arctan2(ty, tx) - np.arctan2(params.l2 * np.sin(d2), params.l1 + params.l2 * np.cos(d2))
    err = np.stack([d1 - th1, d2 - th2], 1)
    err = (err + np.pi) % (2 * np.pi) - np.pi
    return np.clip(kp * err - kd * w, -1, 1)


TINY_AGENT = AgentConfig(hidden=(16, 16), warmup=64, batch_size=16, dtype="float64")


def tiny_config(tmp_path, **kw):
    base = dict(strategy="random", total_steps=300, seeds=(0,), eval_period=100, eval_episodes=4,
                agent=TINY_AGENT, out=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number, ok, detail):
    """Record one acceptance line; the lines are printed at the end of the session."""
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
