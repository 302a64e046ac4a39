import os
import subprocess
import sys

import numpy as np
import pytest

from accuracy_curriculum import kernels

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
needs_cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")


def test_backend_is_known():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_adam_matches_reference_formula(name, rng):
    k = kernels.get_backend(name)
    p, g = rng.normal(size=100), rng.normal(size=100)
    m, v = rng.normal(size=100), rng.random(100)
    ref_m = 0.9 * m + 0.1 * g
    ref_v = 0.999 * v + 0.001 * g * g
    ref_p = p - 1e-3 * (ref_m / 0.271) / (np.sqrt(ref_v / 0.003) + 1e-8)
    k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.271, 0.003)
    np.testing.assert_allclose(m, ref_m, rtol=1e-14)
    np.testing.assert_allclose(v, ref_v, rtol=1e-14)
    np.testing.assert_allclose(p, ref_p, rtol=1e-13)


@needs_cython
@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-13), (np.float32, 1e-6)])
def test_backends_agree_on_optimizer_kernels(dtype, tol, rng):
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    base = [rng.normal(size=1000).astype(dtype) for _ in range(3)] + [rng.random(1000).astype(dtype)]
    a = [x.copy() for x in base]
    b = [x.copy() for x in base]
    for _ in range(5):
        py.adam_update(a[0], a[1], a[2], a[3], 1e-3, 0.9, 0.999, 1e-8, 0.5, 0.01)
        cy.adam_update(b[0], b[1], b[2], b[3], 1e-3, 0.9, 0.999, 1e-8, 0.5, 0.01)
    for x, y in zip(a, b):
        assert x.dtype == y.dtype == dtype
        np.testing.assert_allclose(x, y, rtol=tol, atol=tol)
    t1, t2 = base[0].copy(), base[0].copy()
    py.polyak_update(t1, base[1], 0.001)
    cy.polyak_update(t2, base[1], 0.001)
    np.testing.assert_allclose(t1, t2, rtol=tol, atol=tol)


@needs_cython
def test_backends_agree_on_arm_step(rng):
    n = 257
    theta = rng.uniform(-np.pi, np.pi, (n, 2))
    omega = rng.uniform(-10, 10, (n, 2))
    action = rng.uniform(-1.5, 1.5, (n, 2))
    target = rng.uniform(-0.2, 0.2, (n, 2))
    outs = []
    for name in ("python", "cython"):
        th, om, d = theta.copy(), omega.copy(), np.empty(n)
        for _ in range(30):
            kernels.get_backend(name).arm_step(th, om, action, target, d, 0.1, 0.11, 0.02,
                                               20.0, 2.0, 10.0)
        outs.append((th, om, d))
    for x, y in zip(*outs):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    th = outs[1][0]
    assert np.all((th > -np.pi) & (th <= np.pi))
    assert np.all(np.abs(outs[1][1]) <= 10.0)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("ACCURACY_CURRICULUM_PURE", None)
    if env_value is not None:
        env["ACCURACY_CURRICULUM_PURE"] = env_value
    out = subprocess.run([sys.executable, "-c", "import accuracy_curriculum as a; print(a.KERNEL_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_variable_forces_python_backend():
    assert _backend_in_subprocess("1") == "python"
    assert _backend_in_subprocess(None) == kernels.BACKEND
