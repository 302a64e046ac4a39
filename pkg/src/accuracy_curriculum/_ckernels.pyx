# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: fused Adam, Polyak averaging and the batched arm step.

Every routine mutates its array arguments in place and mirrors the numpy
version in ``_pykernels`` operation for operation.
"""
from cython cimport floating
from libc.math cimport sqrt, sqrtf, cos, sin, ceil, M_PI


def adam_update(floating[::1] param, const floating[::1] grad,
                floating[::1] m, floating[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bias1, double bias2):
    # arithmetic stays in the array precision so the loop vectorizes;
    # one sqrt and one division per element
    cdef Py_ssize_t i, n = param.shape[0]
    cdef floating g, mi, vi
    cdef floating b1 = beta1, b2 = beta2, c1 = 1.0 - beta1, c2 = 1.0 - beta2
    cdef floating step = lr / bias1, root2 = 1.0 / sqrt(bias2), e = eps
    for i in range(n):
        g = grad[i]
        mi = b1 * m[i] + c1 * g
        vi = b2 * v[i] + c2 * (g * g)
        m[i] = mi
        v[i] = vi
        if floating is float:
            param[i] = param[i] - step * mi / (sqrtf(vi) * root2 + e)
        else:
            param[i] = param[i] - step * mi / (sqrt(vi) * root2 + e)


def polyak_update(floating[::1] target, const floating[::1] online, double tau):
    cdef Py_ssize_t i, n = target.shape[0]
    cdef floating keep = 1.0 - tau, t = tau
    for i in range(n):
        target[i] = keep * target[i] + t * online[i]


cdef inline double _wrap(double x) nogil:
    return x - 2.0 * M_PI * ceil((x - M_PI) / (2.0 * M_PI))


cdef inline double _clip(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def arm_step(double[:, ::1] theta, double[:, ::1] omega,
             const double[:, ::1] action, const double[:, ::1] target,
             double[::1] dist_out, double l1, double l2, double dt,
             double torque_gain, double damping, double omega_max):
    cdef Py_ssize_t i, j, n = theta.shape[0]
    cdef double a, w, px, py, dx, dy
    for i in range(n):
        for j in range(2):
            a = _clip(action[i, j], -1.0, 1.0)
            w = omega[i, j] + dt * (torque_gain * a - damping * omega[i, j])
            w = _clip(w, -omega_max, omega_max)
            omega[i, j] = w
            theta[i, j] = _wrap(theta[i, j] + dt * w)
        px = l1 * cos(theta[i, 0]) + l2 * cos(theta[i, 0] + theta[i, 1])
        py = l1 * sin(theta[i, 0]) + l2 * sin(theta[i, 0] + theta[i, 1])
        dx = px - target[i, 0]
        dy = py - target[i, 1]
        dist_out[i] = sqrt(dx * dx + dy * dy)
