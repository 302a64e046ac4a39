"""Two-link planar reaching arm with an accuracy-parameterized sparse reward.

The dynamics are a damped, torque-driven double integrator per joint (no
inertial coupling), integrated with semi-implicit Euler. A target is drawn
area-uniformly from an annulus around the shoulder at every reset. Reward is
0 and the episode ends when the fingertip is within ``epsilon`` of the target,
otherwise -1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, NumericalDivergence

OMEGA_MAX = 10.0
TARGET_R_MIN = 0.05
TARGET_R_MAX = 0.20
OBS_DIM = 11
ACT_DIM = 2
EPS_SLOT = 10


@dataclass(frozen=True)
class EnvParams:
    l1: float = 0.10
    l2: float = 0.11
    dt: float = 0.02
    torque_gain: float = 20.0
    damping: float = 2.0
    horizon: int = 50

    def __post_init__(self):
        for name in ("l1", "l2", "dt", "torque_gain"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"env.{name} must be > 0, got {getattr(self, name)!r}")
        if not self.damping >= 0:
            raise ConfigError(f"env.damping must be >= 0, got {self.damping!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"env.horizon must be an integer >= 1, got {self.horizon!r}")


@dataclass(frozen=True)
class ArmState:
    theta1: float
    theta2: float
    omega1: float
    omega2: float
    target: tuple[float, float] = field(default=(0.0, 0.0))


@dataclass(frozen=True)
class StepOutcome:
    next_state: ArmState
    reward: float
    terminal: bool
    distance: float


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    return x - 2.0 * math.pi * math.ceil((x - math.pi) / (2.0 * math.pi))


def forward_kinematics(theta1: float, theta2: float, params: EnvParams) -> tuple[float, float]:
    return (
        params.l1 * math.cos(theta1) + params.l2 * math.cos(theta1 + theta2),
        params.l1 * math.sin(theta1) + params.l2 * math.sin(theta1 + theta2),
    )


def sample_target(rng: np.random.Generator) -> tuple[float, float]:
    # r^2 uniform gives a uniform density over the annulus area
    angle = rng.uniform(0.0, 2.0 * math.pi)
    radius = math.sqrt(rng.uniform(TARGET_R_MIN ** 2, TARGET_R_MAX ** 2))
    return (radius * math.cos(angle), radius * math.sin(angle))


def reset(rng: np.random.Generator, params: EnvParams) -> ArmState:
    theta1, theta2 = rng.uniform(-math.pi, math.pi, size=2)
    target = sample_target(rng)
    return ArmState(wrap_angle(float(theta1)), wrap_angle(float(theta2)), 0.0, 0.0, target)


def _clip(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def step(state: ArmState, action, epsilon: float, params: EnvParams) -> StepOutcome:
    a1, a2 = float(action[0]), float(action[1])
    values = (a1, a2, state.theta1, state.theta2, state.omega1, state.omega2)
    if not all(math.isfinite(x) for x in values):
        raise NumericalDivergence(f"non-finite action or state: action={(a1, a2)}, state={state}")
    a1, a2 = _clip(a1, -1.0, 1.0), _clip(a2, -1.0, 1.0)
    dt = params.dt
    w1 = state.omega1 + dt * (params.torque_gain * a1 - params.damping * state.omega1)
    w2 = state.omega2 + dt * (params.torque_gain * a2 - params.damping * state.omega2)
    w1 = _clip(w1, -OMEGA_MAX, OMEGA_MAX)
    w2 = _clip(w2, -OMEGA_MAX, OMEGA_MAX)
    t1 = wrap_angle(state.theta1 + dt * w1)
    t2 = wrap_angle(state.theta2 + dt * w2)
    px, py = forward_kinematics(t1, t2, params)
    tx, ty = state.target
    distance = math.sqrt((px - tx) ** 2 + (py - ty) ** 2)
    success = distance <= epsilon
    return StepOutcome(
        ArmState(t1, t2, w1, w2, state.target),
        0.0 if success else -1.0,
        success,
        distance,
    )


def observe(state: ArmState, epsilon: float, params: EnvParams | None = None) -> np.ndarray:
    """Observation layout: cos/sin of both joints, normalized velocities,
    fingertip xy, target xy, required accuracy."""
    params = params or EnvParams()
    px, py = forward_kinematics(state.theta1, state.theta2, params)
    return np.array([
        math.cos(state.theta1), math.sin(state.theta1),
        math.cos(state.theta2), math.sin(state.theta2),
        state.omega1 / OMEGA_MAX, state.omega2 / OMEGA_MAX,
        px, py, state.target[0], state.target[1], epsilon,
    ])


class ArmEnv:
    """Episode bookkeeping around the pure functions above."""

    def __init__(self, params: EnvParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.state: ArmState | None = None
        self.t = 0
        self.done = False

    def reset(self) -> ArmState:
        self.state = reset(self.rng, self.params)
        self.t = 0
        self.done = False
        return self.state

    def step(self, action, epsilon):
        """Advance one step; returns ``(outcome, done)`` where ``done`` also
        covers horizon truncation."""
        outcome = step(self.state, action, epsilon, self.params)
        self.state = outcome.next_state
        self.t += 1
        self.done = outcome.terminal or self.t >= self.params.horizon
        return outcome, self.done


class BatchArm:
    """Vectorized rollouts for ``n`` independent arms sharing one set of params.

    Used for greedy evaluation, where every arm runs the same policy.
    """

    def __init__(self, states: list[ArmState], params: EnvParams):
        self.params = params
        self.theta = np.array([[s.theta1, s.theta2] for s in states], dtype=np.float64)
        self.omega = np.array([[s.omega1, s.omega2] for s in states], dtype=np.float64)
        self.target = np.array([s.target for s in states], dtype=np.float64)
        self.distance = np.empty(len(states))

    def __len__(self):
        return self.theta.shape[0]

    def observe(self, epsilon: float) -> np.ndarray:
        p = self.params
        t1, t2 = self.theta[:, 0], self.theta[:, 1]
        obs = np.empty((len(self), OBS_DIM))
        obs[:, 0] = np.cos(t1)
        obs[:, 1] = np.sin(t1)
        obs[:, 2] = np.cos(t2)
        obs[:, 3] = np.sin(t2)
        obs[:, 4:6] = self.omega / OMEGA_MAX
        obs[:, 6] = p.l1 * np.cos(t1) + p.l2 * np.cos(t1 + t2)
        obs[:, 7] = p.l1 * np.sin(t1) + p.l2 * np.sin(t1 + t2)
        obs[:, 8:10] = self.target
        obs[:, 10] = epsilon
        return obs

    def step(self, action: np.ndarray) -> np.ndarray:
        action = np.ascontiguousarray(action, dtype=np.float64)
        if not np.isfinite(action).all():
            raise NumericalDivergence("non-finite action in batched rollout")
        p = self.params
        kernels.arm_step(self.theta, self.omega, action, self.target, self.distance,
                         p.l1, p.l2, p.dt, p.torque_gain, p.damping, OMEGA_MAX)
        return self.distance
