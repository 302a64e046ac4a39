import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from accuracy_curriculum import nn
from accuracy_curriculum.errors import ConfigError, NumericalDivergence, ShapeError


def test_init_parameter_count_and_shapes(rng):
    net = nn.init([11, 400, 300, 2], ["relu", "relu", "tanh"], rng)
    assert net.n_params == 11 * 400 + 400 + 400 * 300 + 300 + 300 * 2 + 2 == 125_702
    assert [w.shape for w in net.weights] == [(400, 11), (300, 400), (2, 300)]
    assert [b.shape for b in net.biases] == [(400,), (300,), (2,)]


def test_init_bounds_and_determinism():
    a = nn.init([11, 400, 300, 2], ["relu", "relu", "tanh"], np.random.default_rng(3))
    b = nn.init([11, 400, 300, 2], ["relu", "relu", "tanh"], np.random.default_rng(3))
    assert np.array_equal(a.flat, b.flat)
    assert np.abs(a.weights[1]).max() <= 1 / np.sqrt(400) == 0.05
    assert np.abs(a.weights[0]).max() <= 1 / np.sqrt(11)
    assert np.abs(a.weights[2]).max() <= 3e-3 and np.abs(a.biases[2]).max() <= 3e-3


def test_views_share_the_flat_buffer(rng):
    net = nn.init([3, 4, 2], ["relu", "identity"], rng)
    net.weights[1][0, 0] = 123.0
    assert 123.0 in net.flat


@pytest.mark.parametrize("dims,acts", [([], []), ([3], []), ([3, 0, 1], ["relu", "identity"]),
                                       ([3, 2], ["relu", "relu"]), ([3, 2], ["sigmoid"])])
def test_init_rejects_bad_configuration(dims, acts, rng):
    with pytest.raises(ConfigError):
        nn.init(dims, acts, rng)


def test_forward_zero_net_gives_zero():
    net = nn.Network([4, 5, 3], ["relu", "identity"])
    out, _ = nn.forward(net, np.ones((2, 4)))
    assert np.array_equal(out, np.zeros((2, 3)))


def test_forward_identity_layer():
    net = nn.Network([3, 3], ["identity"])
    net.weights[0][...] = np.eye(3)
    x = np.array([[1.0, -2.0, 3.5]])
    out, _ = nn.forward(net, x)
    assert np.array_equal(out, x)


def test_forward_hand_computed_relu_net():
    net = nn.Network([2, 2, 2], ["relu", "identity"])
    net.weights[0][...] = [[1, -1], [2, 1]]
    net.biases[0][...] = [0, -1]
    net.weights[1][...] = [[1, 1], [-1, 2]]
    net.biases[1][...] = [0.5, 0]
    # z1 = [1-2, 2+2-1] = [-1, 3] -> a1 = [0, 3] -> [0+3+0.5, 0+6]
    out, cache = nn.forward(net, np.array([[1.0, 2.0]]))
    assert out.tolist() == [[3.5, 6.0]]
    assert cache.pre[0].tolist() == [[-1.0, 3.0]]
    assert np.array_equal(nn.predict(net, np.array([[1.0, 2.0]])), out)


def test_forward_width_mismatch(rng):
    net = nn.init([3, 2], ["identity"], rng)
    with pytest.raises(ShapeError):
        nn.forward(net, np.ones((1, 4)))


def test_backward_zero_upstream(rng):
    net = nn.init([4, 6, 3], ["relu", "tanh"], rng)
    _, cache = nn.forward(net, rng.normal(size=(5, 4)))
    grads, gin = nn.backward(net, cache, np.zeros((5, 3)))
    assert not grads.any() and not gin.any()


def test_backward_shape_mismatch(rng):
    net = nn.init([4, 3], ["identity"], rng)
    _, cache = nn.forward(net, rng.normal(size=(5, 4)))
    with pytest.raises(ShapeError):
        nn.backward(net, cache, np.zeros((5, 2)))


def test_backward_sums_over_batch(rng):
    net = nn.init([4, 6, 3], ["relu", "tanh"], rng)
    row = rng.normal(size=(1, 4))
    up = rng.normal(size=(1, 3))
    _, c1 = nn.forward(net, row)
    g1, _ = nn.backward(net, c1, up)
    _, c5 = nn.forward(net, np.repeat(row, 5, 0))
    g5, _ = nn.backward(net, c5, np.repeat(up, 5, 0))
    np.testing.assert_allclose(g5, 5 * g1, rtol=1e-12, atol=1e-15)


def _smooth_or_kink_free(net, x, rng):
    for _ in range(100):
        _, cache = nn.forward(net, x)
        if all(np.abs(z).min() > 1e-3 for z, a in zip(cache.pre, net.activations) if a == "relu"):
            return x
        x = rng.normal(size=x.shape)
    raise AssertionError("could not avoid ReLU kinks")


@pytest.mark.parametrize("seed", range(8))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    dims = [int(rng.integers(2, 7)) for _ in range(int(rng.integers(2, 5)))]
    acts = [str(rng.choice(["relu", "tanh", "identity"])) for _ in dims[1:]]
    net = nn.init(dims, acts, rng, final_scale=0.5)
    x = _smooth_or_kink_free(net, rng.normal(size=(6, dims[0])), rng)
    target = rng.normal(size=(6, dims[-1]))

    def loss_and_grad(n):
        out, cache = nn.forward(n, x)
        diff = out - target
        grads, _ = nn.backward(n, cache, diff)
        return 0.5 * float((diff ** 2).sum()), grads

    assert nn.gradient_check(net, loss_and_grad) < 1e-4


def test_input_gradient_matches_finite_differences(rng):
    net = nn.init([5, 7, 1], ["tanh", "identity"], rng, final_scale=0.5)
    x = rng.normal(size=(3, 5))
    _, cache = nn.forward(net, x)
    _, gin = nn.backward(net, cache, np.ones((3, 1)))
    h = 1e-6
    num = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num[idx] = (nn.predict(net, xp).sum() - nn.predict(net, xm).sum()) / (2 * h)
    np.testing.assert_allclose(gin, num, rtol=1e-6, atol=1e-9)


def test_gradient_check_linear_net_is_exact(rng):
    net = nn.init([4, 3], ["identity"], rng, final_scale=1.0)
    x = rng.normal(size=(5, 4))
    c = rng.normal(size=(5, 3))

    def loss_and_grad(n):
        out, cache = nn.forward(n, x)
        grads, _ = nn.backward(n, cache, c)
        return float((out * c).sum()), grads

    assert nn.gradient_check(net, loss_and_grad) < 1e-8


def test_gradient_check_flags_a_corrupted_backward(rng):
    net = nn.init([4, 6, 6, 2], ["relu", "tanh", "identity"], rng, final_scale=0.5)
    x = _smooth_or_kink_free(net, rng.normal(size=(5, 4)), rng)

    def corrupted(n):
        out, cache = nn.forward(n, x)
        grads, _ = nn.backward(n, cache, out)
        grads[: grads.size // 2] *= 1.5
        return 0.5 * float((out ** 2).sum()), grads

    assert nn.gradient_check(net, corrupted) > 1e-2


def _scalar_net(value):
    net = nn.Network([1, 1], ["identity"])
    net.weights[0][0, 0] = value
    return net


def test_adam_first_step_value():
    net = _scalar_net(1.0)
    state = nn.AdamState.zeros_like(net)
    grads = np.zeros(2)
    grads[0] = 1.0
    nn.adam_step(net, grads, state, 1e-3)
    assert abs(net.weights[0][0, 0] - (1 - 1e-3 * (1 / (1 + 1e-8)))) < 1e-6
    assert net.weights[0][0, 0] == pytest.approx(0.999, abs=1e-6)
    assert state.step == 1


def test_adam_zero_gradient_is_a_no_op(rng):
    net = nn.init([3, 4, 2], ["relu", "identity"], rng)
    before = net.flat.copy()
    state = nn.AdamState.zeros_like(net)
    nn.adam_step(net, np.zeros(net.n_params), state, 1e-3)
    assert np.array_equal(net.flat, before)
    assert not state.m.any() and not state.v.any()


def test_adam_equal_gradients_give_equal_updates(rng):
    net = nn.init([2, 3], ["identity"], rng)
    before = net.flat.copy()
    state = nn.AdamState.zeros_like(net)
    nn.adam_step(net, np.full(net.n_params, 0.37), state, 1e-2)
    delta = net.flat - before
    assert np.allclose(delta, delta[0], rtol=0, atol=1e-15)


def test_adam_rejects_non_finite(rng):
    net = nn.init([2, 3], ["identity"], rng)
    g = np.zeros(net.n_params)
    g[1] = np.nan
    with pytest.raises(NumericalDivergence):
        nn.adam_step(net, g, nn.AdamState.zeros_like(net), 1e-3)


def test_adam_is_deterministic(rng):
    net = nn.init([3, 4, 2], ["relu", "identity"], rng)
    g = rng.normal(size=net.n_params)
    a, b = net.copy(), net.copy()
    sa, sb = nn.AdamState.zeros_like(a), nn.AdamState.zeros_like(b)
    for _ in range(3):
        nn.adam_step(a, g, sa, 1e-3)
        nn.adam_step(b, g, sb, 1e-3)
    assert np.array_equal(a.flat, b.flat) and np.array_equal(sa.v, sb.v)
    assert (sa.v >= 0).all()


def test_soft_update_examples(rng):
    online = nn.init([3, 4, 2], ["relu", "identity"], rng)
    target = nn.init([3, 4, 2], ["relu", "identity"], rng)
    t0 = target.copy()
    nn.soft_update(target, online, 0.0)
    assert np.array_equal(target.flat, t0.flat)
    nn.soft_update(target, online, 1.0)
    assert np.array_equal(target.flat, online.flat)
    a, b = _scalar_net(0.0), _scalar_net(1.0)
    nn.soft_update(a, b, 0.001)
    assert a.weights[0][0, 0] == pytest.approx(0.001, abs=1e-15)


def test_soft_update_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        nn.soft_update(nn.init([3, 2], ["identity"], rng), nn.init([3, 4], ["identity"], rng), 0.5)


@given(arrays(np.float64, 12, elements=st.floats(-10, 10)),
       arrays(np.float64, 12, elements=st.floats(-10, 10)),
       st.floats(0.0, 1.0))
def test_soft_update_contracts_toward_online(t, o, tau):
    target = nn.Network([3, 3], ["identity"], t.copy())
    online = nn.Network([3, 3], ["identity"], o.copy())
    nn.soft_update(target, online, tau)
    np.testing.assert_allclose(np.abs(target.flat - o), (1 - tau) * np.abs(t - o), atol=1e-12)


def test_checkpoint_round_trip_and_layout(tmp_path, rng):
    net = nn.init([11, 5, 2], ["relu", "tanh"], rng)
    path = tmp_path / "actor.bin"
    nn.save_params(net, path)
    raw = path.read_bytes()
    assert struct.unpack_from("<7i", raw) == (2, 11, 5, 1, 5, 2, 2)
    assert len(raw) == 4 + 12 * 2 + 8 * net.n_params
    loaded = nn.load_params(path)
    assert loaded.dims == net.dims and loaded.activations == net.activations
    assert np.array_equal(loaded.flat, net.flat)


def test_checkpoint_of_float32_net_is_float64(tmp_path, rng):
    net = nn.init([3, 2], ["identity"], rng, dtype=np.float32)
    nn.save_params(net, tmp_path / "n.bin")
    loaded = nn.load_params(tmp_path / "n.bin")
    assert loaded.dtype == np.float64
    np.testing.assert_array_equal(loaded.flat, net.flat.astype(np.float64))


def test_checkpoint_truncated(tmp_path, rng):
    net = nn.init([3, 2], ["identity"], rng)
    nn.save_params(net, tmp_path / "n.bin")
    data = (tmp_path / "n.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(data[:-8])
    with pytest.raises(ShapeError):
        nn.load_params(tmp_path / "bad.bin")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_float32_forward_tracks_float64(seed):
    rng = np.random.default_rng(seed)
    net64 = nn.init([11, 32, 16, 2], ["relu", "relu", "tanh"], rng)
    net32 = nn.Network(net64.dims, net64.activations, net64.flat.astype(np.float32))
    x = rng.normal(size=(4, 11))
    np.testing.assert_allclose(nn.predict(net32, x), nn.predict(net64, x), atol=1e-5)
