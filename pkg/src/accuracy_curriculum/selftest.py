"""Quick built-in checks runnable without pytest (``accuracy-curriculum selftest``)."""
from __future__ import annotations

import time

import numpy as np

from . import kernels, nn
from .agent import AgentNets, Batch, actor_objective_and_grad, compute_targets, critic_loss_and_grad
from .curriculum import competence_progress, sampling_probabilities


def random_small_net(rng, n_in, n_out, out_act="identity", max_layers=3, max_units=16):
    n_layers = int(rng.integers(1, max_layers + 1))
    dims = [n_in] + [int(rng.integers(2, max_units + 1)) for _ in range(n_layers - 1)] + [n_out]
    acts = ["relu"] * (n_layers - 1) + [out_act]
    net = nn.init(dims, acts, rng, np.float64, final_scale=0.5)
    return net


KINK_MARGIN = 1e-3


def relu_margin(net, x):
    """Smallest |pre-activation| over the ReLU layers of ``net`` on ``x``."""
    _, cache = nn.forward(net, x)
    return min((float(np.abs(z).min()) for z, act in zip(cache.pre, net.activations)
                if act == "relu"), default=np.inf)


def random_batch(rng, n, obs_dim=11, act_dim=2):
    terminal = rng.random(n) < 0.3
    return Batch(obs=rng.normal(size=(n, obs_dim)), action=rng.uniform(-1, 1, (n, act_dim)),
                 reward=np.where(terminal, 0.0, -1.0), next_obs=rng.normal(size=(n, obs_dim)),
                 terminal=terminal, epsilon=np.full(n, 0.02))


def critic_gradient_error(rng, batch_size=8, gamma=0.99):
    """Critic regression loss against clipped TD targets from random target nets.

    Inputs are redrawn until every ReLU pre-activation is at least
    ``KINK_MARGIN`` from zero, so the finite-difference steps never cross a kink.
    """
    actor = random_small_net(rng, 11, 2, out_act="tanh")
    critic = random_small_net(rng, 13, 1)
    nets = AgentNets(actor, critic, actor.copy(), critic.copy(),
                     nn.AdamState.zeros_like(actor), nn.AdamState.zeros_like(critic))
    while True:
        batch = random_batch(rng, batch_size)
        if relu_margin(critic, np.concatenate([batch.obs, batch.action], 1)) >= KINK_MARGIN:
            break
    targets = compute_targets(nets, batch, gamma)
    return nn.gradient_check(critic, lambda net: critic_loss_and_grad(net, batch, targets))


def actor_gradient_error(rng, batch_size=8):
    """Exact (non-inverted) gradient of -mean Q(s, mu(s)) w.r.t. actor parameters."""
    actor = random_small_net(rng, 11, 2, out_act="tanh")
    critic = random_small_net(rng, 13, 1)
    while True:
        obs = rng.normal(size=(batch_size, 11))
        x = np.concatenate([obs, nn.predict(actor, obs)], 1)
        if min(relu_margin(actor, obs), relu_margin(critic, x)) >= KINK_MARGIN:
            break

    def loss_and_grad(net):
        objective, grads = actor_objective_and_grad(net, critic, obs, invert=False)
        return -objective, grads

    return nn.gradient_check(actor, loss_and_grad)


def brute_force_progress(scores, n):
    if len(scores) < 2 * n:
        return None
    t = len(scores) - 1
    recent = 0.0
    for j in range(t - n + 1, t + 1):
        recent += scores[j]
    older = 0.0
    for j in range(t - 2 * n + 1, t - n + 1):
        older += scores[j]
    return abs(recent - older) / (2 * n)


def run_all(verbose=True) -> bool:
    rng = np.random.default_rng(12345)
    results = []

    def report(name, ok, detail):
        results.append(ok)
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    t0 = time.perf_counter()
    errs = [max(critic_gradient_error(rng), actor_gradient_error(rng)) for _ in range(10)]
    report("gradients", max(errs) < 1e-4, f"max relative error {max(errs):.2e} on 10 nets "
           f"({time.perf_counter() - t0:.1f}s)")

    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        scores = list(rng.random(int(rng.integers(2 * n, 40))))
        worst = max(worst, abs(competence_progress(scores, n) - brute_force_progress(scores, n)))
    report("competence progress", worst <= 1e-12, f"max deviation {worst:.1e} on 1000 histories")

    p = sampling_probabilities([0.5, 0.25, 0.0, 0.0], 2)
    report("sampling probabilities", np.allclose(p, [0.8, 0.2, 0, 0], atol=1e-12), f"{p.round(6)}")

    a = rng.normal(size=257)
    outs = []
    for name in ("python", "cython") if kernels.BACKEND == "cython" else ("python",):
        k = kernels.get_backend(name)
        p_, m, v = a.copy(), np.zeros_like(a), np.zeros_like(a)
        k.adam_update(p_, a * 0.3, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        outs.append(p_)
    agree = all(np.allclose(o, outs[0], rtol=1e-13, atol=0) for o in outs)
    report("kernel backends", agree, f"active backend {kernels.BACKEND}")
    return all(results)
