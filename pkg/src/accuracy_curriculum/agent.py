"""DDPG over accuracy-augmented observations.

Actor and critic both see the 11-component observation whose last slot is the
episode's required accuracy; the critic additionally receives the action.
There is no exploration noise: the actor's deterministic output is executed
as is, including before learning starts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .env import ACT_DIM, EPS_SLOT, OBS_DIM, TARGET_R_MAX, ArmEnv, observe
from .errors import BufferUnderfilled, ConfigError, NumericalDivergence


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    tau: float = 0.001
    critic_lr: float = 0.001
    actor_lr: float = 0.0001
    batch_size: int = 64
    warmup: int = 1000
    updates_per_step: int = 1
    buffer_capacity: int = 1_000_000
    hidden: tuple[int, ...] = (400, 300)
    dtype: str = "float32"
    scale_inputs: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"agent.gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"agent.tau must be in (0, 1], got {self.tau}")
        for name in ("critic_lr", "actor_lr"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"agent.{name} must be > 0")
        for name in ("batch_size", "updates_per_step", "buffer_capacity"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"agent.{name} must be >= 1")
        if self.batch_size > self.warmup:
            raise ConfigError(
                f"agent.batch_size ({self.batch_size}) must not exceed agent.warmup ({self.warmup})")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"agent.dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def return_bounds(self) -> tuple[float, float]:
        # rewards are in {-1, 0}: returns lie in [-1/(1-gamma), 0]
        return (-1.0 / (1.0 - self.gamma), 0.0)


# Fixed per-slot divisors bringing every observation component to roughly unit
# range before it enters a network: positions by the largest target radius,
# accuracy by 0.05. Angles and velocities are already normalized.
INPUT_SCALE = np.array([1, 1, 1, 1, 1, 1,
                        TARGET_R_MAX, TARGET_R_MAX, TARGET_R_MAX, TARGET_R_MAX, 0.05])


def scale_obs(obs):
    return obs / INPUT_SCALE


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    terminal: bool
    epsilon: float


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    terminal: np.ndarray
    epsilon: np.ndarray

    def __len__(self):
        return self.reward.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transitions are overwritten first."""

    def __init__(self, capacity: int = 1_000_000, allowed_epsilons=None):
        if capacity < 1:
            raise ConfigError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.allowed_epsilons = None if allowed_epsilons is None else frozenset(allowed_epsilons)
        self.obs = np.zeros((self.capacity, OBS_DIM))
        self.action = np.zeros((self.capacity, ACT_DIM))
        self.reward = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, OBS_DIM))
        self.terminal = np.zeros(self.capacity, dtype=bool)
        self.epsilon = np.zeros(self.capacity)
        self.cursor = 0
        self.fill = 0

    def __len__(self):
        return self.fill

    def push(self, t: Transition) -> None:
        if (t.reward == 0.0) != bool(t.terminal) or t.reward not in (0.0, -1.0):
            raise ValueError(f"transition reward {t.reward} inconsistent with terminal={t.terminal}")
        if t.obs[EPS_SLOT] != t.epsilon or t.next_obs[EPS_SLOT] != t.epsilon:
            raise ValueError("observation accuracy slot differs from the transition's epsilon")
        if self.allowed_epsilons is not None and t.epsilon not in self.allowed_epsilons:
            raise ValueError(f"epsilon {t.epsilon} is not in the configured accuracy set")
        i = self.cursor
        self.obs[i] = t.obs
        self.action[i] = t.action
        self.reward[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.terminal[i] = t.terminal
        self.epsilon[i] = t.epsilon
        self.cursor = (i + 1) % self.capacity
        self.fill = min(self.fill + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.fill < batch_size:
            raise BufferUnderfilled(f"buffer holds {self.fill} transitions, batch needs {batch_size}")
        idx = rng.integers(0, self.fill, size=batch_size)
        return self.gather(idx)

    def gather(self, idx) -> Batch:
        return Batch(self.obs[idx], self.action[idx], self.reward[idx],
                     self.next_obs[idx], self.terminal[idx], self.epsilon[idx])


@dataclass
class AgentNets:
    actor: nn.Network
    critic: nn.Network
    target_actor: nn.Network
    target_critic: nn.Network
    actor_opt: nn.AdamState
    critic_opt: nn.AdamState

    @classmethod
    def create(cls, rng: np.random.Generator, hidden=(400, 300), dtype=np.float32):
        hidden = list(hidden)
        actor = nn.init([OBS_DIM, *hidden, ACT_DIM], ["relu"] * len(hidden) + ["tanh"], rng, dtype)
        critic = nn.init([OBS_DIM + ACT_DIM, *hidden, 1], ["relu"] * len(hidden) + ["identity"],
                         rng, dtype)
        return cls(actor, critic, actor.copy(), critic.copy(),
                   nn.AdamState.zeros_like(actor), nn.AdamState.zeros_like(critic))


def select_action(nets: AgentNets, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if not np.isfinite(obs).all():
        raise NumericalDivergence(f"non-finite observation: {obs}")
    return nn.predict(nets.actor, obs[None, :])[0].astype(np.float64)


def _q_input(obs, action):
    return np.concatenate([obs, action], axis=1)


def compute_targets(nets: AgentNets, batch: Batch, gamma: float) -> np.ndarray:
    """Clipped one-step TD targets; terminal transitions do not bootstrap."""
    next_a = nn.predict(nets.target_actor, batch.next_obs)
    next_q = nn.predict(nets.target_critic, _q_input(batch.next_obs, next_a))[:, 0]
    next_q = next_q.astype(np.float64)
    if not np.isfinite(next_q).all():
        raise NumericalDivergence("non-finite target-critic output")
    y = batch.reward + gamma * (1.0 - batch.terminal) * next_q
    return np.clip(y, -1.0 / (1.0 - gamma), 0.0)


def critic_loss_and_grad(critic: nn.Network, batch: Batch, targets: np.ndarray):
    """Mean squared TD error and its flat gradient w.r.t. critic parameters."""
    q, cache = nn.forward(critic, _q_input(batch.obs, batch.action))
    err = q[:, 0] - targets.astype(critic.dtype)
    n = len(err)
    loss = float(np.dot(err, err)) / n
    grads, _ = nn.backward(critic, cache, (2.0 / n) * err[:, None])
    return loss, grads


def critic_update(nets: AgentNets, batch: Batch, config: AgentConfig) -> float:
    targets = compute_targets(nets, batch, config.gamma)
    loss, grads = critic_loss_and_grad(nets.critic, batch, targets)
    nn.adam_step(nets.critic, grads, nets.critic_opt, config.critic_lr)
    return loss


def invert_gradient(action_grad, action, low=-1.0, high=1.0):
    """Scale ascent gradients by the remaining room toward the bound they push at."""
    g = np.asarray(action_grad)
    p = np.clip(action, low, high)
    width = high - low
    return np.where(g > 0, g * (high - p) / width, g * (p - low) / width)


def actor_objective_and_grad(actor: nn.Network, critic: nn.Network, obs: np.ndarray,
                             invert: bool = True):
    """Mean Q(s, mu(s)) over the batch and the flat gradient of its negation.

    With ``invert=False`` the returned gradient is the exact gradient of
    ``-mean Q``; with ``invert=True`` the action gradients are first passed
    through :func:`invert_gradient`.
    """
    action, a_cache = nn.forward(actor, obs)
    q, q_cache = nn.forward(critic, _q_input(obs, action))
    n = q.shape[0]
    objective = float(q.sum()) / n
    _, dq_din = nn.backward(critic, q_cache, np.full_like(q, 1.0 / n), param_grads=False)
    dq_da = dq_din[:, OBS_DIM:]
    if invert:
        dq_da = invert_gradient(dq_da, action)
    grads, _ = nn.backward(actor, a_cache, -dq_da)
    return objective, grads


def actor_update(nets: AgentNets, batch: Batch, config: AgentConfig) -> float:
    objective, grads = actor_objective_and_grad(nets.actor, nets.critic, batch.obs)
    nn.adam_step(nets.actor, grads, nets.actor_opt, config.actor_lr)
    return objective


@dataclass
class StepReport:
    reward: float
    terminal: bool
    done: bool
    distance: float
    updates: int = 0
    critic_loss: float | None = None
    actor_objective: float | None = None


@dataclass
class Agent:
    config: AgentConfig
    nets: AgentNets
    buffer: ReplayBuffer
    env_steps: int = 0
    update_cycles: int = 0

    @classmethod
    def create(cls, config: AgentConfig, rng: np.random.Generator, accuracy_set=None):
        nets = AgentNets.create(rng, config.hidden, np.dtype(config.dtype))
        return cls(config, nets, ReplayBuffer(config.buffer_capacity, accuracy_set))

    def act(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        return select_action(self.nets, scale_obs(obs) if self.config.scale_inputs else obs)

    def policy(self, obs_batch):
        """Greedy actions for an ``(n, 11)`` batch of raw observations."""
        obs_batch = np.asarray(obs_batch, dtype=np.float64)
        if self.config.scale_inputs:
            obs_batch = scale_obs(obs_batch)
        return nn.predict(self.nets.actor, obs_batch).astype(np.float64)

    def update(self, rng: np.random.Generator):
        """One critic update, one actor update, then Polyak on both targets."""
        batch = self.buffer.sample(self.config.batch_size, rng)
        if self.config.scale_inputs:
            batch.obs = scale_obs(batch.obs)
            batch.next_obs = scale_obs(batch.next_obs)
        loss = critic_update(self.nets, batch, self.config)
        objective = actor_update(self.nets, batch, self.config)
        nn.soft_update(self.nets.target_critic, self.nets.critic, self.config.tau)
        nn.soft_update(self.nets.target_actor, self.nets.actor, self.config.tau)
        self.update_cycles += 1
        return loss, objective


def train_step(agent: Agent, env: ArmEnv, epsilon: float, rng: np.random.Generator) -> StepReport:
    """Act greedily, store the transition, then learn once warmup is over.

    Resets ``env`` first if its previous episode ended. Horizon truncation is
    not stored as terminal, so such transitions still bootstrap.
    """
    if env.state is None or env.done:
        env.reset()
    obs = observe(env.state, epsilon, env.params)
    action = agent.act(obs)
    outcome, done = env.step(action, epsilon)
    next_obs = observe(outcome.next_state, epsilon, env.params)
    agent.buffer.push(Transition(obs, action, outcome.reward, next_obs, outcome.terminal, epsilon))
    agent.env_steps += 1
    report = StepReport(outcome.reward, outcome.terminal, done, outcome.distance)
    if agent.env_steps >= agent.config.warmup:
        for _ in range(agent.config.updates_per_step):
            report.critic_loss, report.actor_objective = agent.update(rng)
            report.updates += 1
    return report
