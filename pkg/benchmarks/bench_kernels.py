"""Compare the compiled and numpy kernel backends.

Run ``python3 benchmarks/bench_kernels.py``. Times the optimizer kernels on an
actor-sized flat buffer, the batched arm step used by evaluation, and one full
agent update cycle with each backend swapped in.
"""
import argparse
import timeit

import numpy as np

from accuracy_curriculum import kernels, nn
from accuracy_curriculum.agent import Agent, AgentConfig, Transition
from accuracy_curriculum.env import ArmEnv, EnvParams, observe


def best_of(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_optimizer(k, n, dtype):
    rng = np.random.default_rng(0)
    p, g = rng.normal(size=n).astype(dtype), rng.normal(size=n).astype(dtype)
    m, v = np.zeros(n, dtype), np.zeros(n, dtype)
    adam = best_of(lambda: k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.5, 0.5), 200)
    polyak = best_of(lambda: k.polyak_update(p, g, 0.001), 200)
    return adam, polyak


def bench_arm(k, n):
    rng = np.random.default_rng(0)
    theta, omega = rng.uniform(-3, 3, (n, 2)), np.zeros((n, 2))
    action, target, dist = rng.uniform(-1, 1, (n, 2)), rng.uniform(-.2, .2, (n, 2)), np.empty(n)
    return best_of(lambda: k.arm_step(theta, omega, action, target, dist, 0.1, 0.11, 0.02,
                                      20.0, 2.0, 10.0), 2000)


def bench_update(k, hidden):
    saved = nn.kernels.adam_update, nn.kernels.polyak_update
    nn.kernels.adam_update, nn.kernels.polyak_update = k.adam_update, k.polyak_update
    try:
        rng = np.random.default_rng(0)
        agent = Agent.create(AgentConfig(hidden=hidden), rng)
        env = ArmEnv(EnvParams(), rng)
        env.reset()
        for _ in range(1000):
            obs = observe(env.state, 0.05)
            a = rng.uniform(-1, 1, 2)
            out, _ = env.step(a, 0.05)
            agent.buffer.push(Transition(obs, a, out.reward, observe(out.next_state, 0.05),
                                         out.terminal, 0.05))
            if env.done:
                env.reset()
        return best_of(lambda: agent.update(rng), 50)
    finally:
        nn.kernels.adam_update, nn.kernels.polyak_update = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--params", type=int, default=126_201, help="flat buffer size")
    args = parser.parse_args()
    names = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"active backend: {kernels.BACKEND}")
    rows = []
    for name in names:
        k = kernels.get_backend(name)
        a32, p32 = bench_optimizer(k, args.params, np.float32)
        a64, p64 = bench_optimizer(k, args.params, np.float64)
        rows.append((name, a32, p32, a64, p64, bench_arm(k, 10), bench_arm(k, 1),
                     bench_update(k, (400, 300))))
    header = ("backend", "adam f32", "polyak f32", "adam f64", "polyak f64", "arm x10",
              "arm x1", "update 400/300")
    print("  ".join(f"{h:>14}" for h in header))
    for name, *times in rows:
        print("  ".join([f"{name:>14}"] + [f"{t * 1e6:>11.1f} us" for t in times]))
    if len(rows) == 2:
        speed = np.array(rows[0][1:]) / np.array(rows[1][1:])
        print("  ".join([f"{'speedup':>14}"] + [f"{s:>13.1f}x" for s in speed]))


if __name__ == "__main__":
    main()
