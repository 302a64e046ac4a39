"""Pure-numpy implementations of the compiled kernels.

Signatures and in-place semantics match ``_ckernels`` exactly, so either
module can back ``accuracy_curriculum.kernels``.
"""
import numpy as np


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bias1, bias2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    param -= (lr / bias1) * m / (np.sqrt(v) * (1.0 / np.sqrt(bias2)) + eps)


def polyak_update(target, online, tau):
    target *= 1.0 - tau
    target += tau * online


def _wrap(x):
    return x - 2.0 * np.pi * np.ceil((x - np.pi) / (2.0 * np.pi))


def arm_step(theta, omega, action, target, dist_out, l1, l2, dt,
             torque_gain, damping, omega_max):
    a = np.clip(action, -1.0, 1.0)
    w = omega + dt * (torque_gain * a - damping * omega)
    np.clip(w, -omega_max, omega_max, out=omega)
    theta[...] = _wrap(theta + dt * omega)
    t1 = theta[:, 0]
    t12 = theta[:, 0] + theta[:, 1]
    px = l1 * np.cos(t1) + l2 * np.cos(t12)
    py = l1 * np.sin(t1) + l2 * np.sin(t12)
    dist_out[...] = np.sqrt((px - target[:, 0]) ** 2 + (py - target[:, 1]) ** 2)
