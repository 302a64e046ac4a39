"""Dense feed-forward networks with hand-written backprop, Adam and Polyak averaging.

All parameters of a network live in one flat, contiguous buffer; the per-layer
weight matrices (``out x in``) and bias vectors are views into it. Gradients
use the same flat layout, so optimizer and target-network updates are single
kernel calls over the whole parameter vector.

Gradient convention: ``backward`` sums over the batch. Any ``1/batch`` factor
belongs to the loss that produced the upstream gradient.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, NumericalDivergence, ShapeError

ACTIVATIONS = ("identity", "relu", "tanh")
_ACT_CODES = {name: i for i, name in enumerate(ACTIVATIONS)}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Network:
    """Parameters of a dense network: flat buffer plus per-layer views."""

    def __init__(self, dims, activations, flat=None, dtype=np.float64):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ConfigError(f"layer dims must be >= 2 positive integers, got {dims}")
        if len(activations) != len(dims) - 1:
            raise ConfigError(
                f"need {len(dims) - 1} activation tags for dims {dims}, got {len(activations)}")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}; allowed: {', '.join(ACTIVATIONS)}")
        self.dims = dims
        self.activations = list(activations)
        size = sum(o * i + o for i, o in zip(dims[:-1], dims[1:]))
        if flat is None:
            flat = np.zeros(size, dtype=dtype)
        elif flat.shape != (size,):
            raise ShapeError(f"flat buffer has shape {flat.shape}, expected ({size},)")
        self.flat = flat
        self.weights, self.biases = _views(flat, dims)

    @property
    def n_params(self) -> int:
        return self.flat.size

    @property
    def dtype(self):
        return self.flat.dtype

    def copy(self) -> "Network":
        return Network(self.dims, self.activations, self.flat.copy())

    def grad_views(self, grads: np.ndarray):
        """Per-layer ``(dW, db)`` views of a flat gradient vector."""
        return list(zip(*_views(grads, self.dims)))

    def __repr__(self):
        return f"Network(dims={self.dims}, activations={self.activations}, dtype={self.dtype})"


def _views(flat, dims):
    weights, biases = [], []
    pos = 0
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos:pos + n_out * n_in].reshape(n_out, n_in))
        pos += n_out * n_in
        biases.append(flat[pos:pos + n_out])
        pos += n_out
    return weights, biases


def init(layer_dims, activations, rng: np.random.Generator, dtype=np.float64,
         final_scale: float = 3e-3) -> Network:
    """Fan-in uniform init for hidden layers, small uniform init for the output layer."""
    net = Network(layer_dims, activations, dtype=dtype)
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        bound = final_scale if k == last else 1.0 / math.sqrt(w.shape[1])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = rng.uniform(-bound, bound, size=b.shape)
    return net


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)       # input to each layer
    pre: list = field(default_factory=list)          # affine outputs z
    post: list = field(default_factory=list)         # activations a


def forward(net: Network, x: np.ndarray):
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.dims[0]:
        raise ShapeError(f"input width {x.shape[1]} does not match first layer {net.dims[0]}")
    cache = ForwardCache()
    for w, b, act in zip(net.weights, net.biases, net.activations):
        cache.inputs.append(x)
        z = x @ w.T
        z += b
        if act == "relu":
            a = np.maximum(z, 0.0)
        elif act == "tanh":
            a = np.tanh(z)
        else:
            a = z
        cache.pre.append(z)
        cache.post.append(a)
        x = a
    return x, cache


def predict(net: Network, x: np.ndarray) -> np.ndarray:
    """Forward pass without keeping a cache."""
    x = np.asarray(x, dtype=net.dtype)
    for w, b, act in zip(net.weights, net.biases, net.activations):
        x = x @ w.T
        x += b
        if act == "relu":
            np.maximum(x, 0.0, out=x)
        elif act == "tanh":
            np.tanh(x, out=x)
    return x


def backward(net: Network, cache: ForwardCache, upstream: np.ndarray, param_grads: bool = True):
    """Reverse-mode pass. Returns ``(flat_grads or None, input_grad)``.

    ReLU has derivative 0 at exactly 0.
    """
    g = np.asarray(upstream, dtype=net.dtype)
    out = cache.post[-1]
    if g.shape != out.shape:
        raise ShapeError(f"upstream gradient shape {g.shape} does not match output {out.shape}")
    grads = np.empty_like(net.flat) if param_grads else None
    views = net.grad_views(grads) if param_grads else None
    for k in range(len(net.weights) - 1, -1, -1):
        act = net.activations[k]
        if act == "relu":
            g = g * (cache.pre[k] > 0)
        elif act == "tanh":
            a = cache.post[k]
            g = g * (1.0 - a * a)
        if param_grads:
            dw, db = views[k]
            np.matmul(g.T, cache.inputs[k], out=dw)
            g.sum(axis=0, out=db)
        g = g @ net.weights[k]
    return grads, g


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, net: Network) -> "AdamState":
        return cls(np.zeros_like(net.flat), np.zeros_like(net.flat), 0)


def adam_step(net: Network, grads: np.ndarray, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam step, in place on ``net`` and ``state``."""
    if grads.shape != net.flat.shape or state.m.shape != net.flat.shape:
        raise ShapeError(f"gradient shape {grads.shape} does not match parameters {net.flat.shape}")
    if not np.isfinite(grads).all():
        raise NumericalDivergence("non-finite gradient passed to Adam")
    state.step += 1
    bias1 = 1.0 - ADAM_BETA1 ** state.step
    bias2 = 1.0 - ADAM_BETA2 ** state.step
    kernels.adam_update(net.flat, np.ascontiguousarray(grads, dtype=net.dtype), state.m, state.v,
                        lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, bias1, bias2)


def soft_update(target: Network, online: Network, tau: float) -> Network:
    """target <- (1 - tau) * target + tau * online, in place; returns ``target``."""
    if target.dims != online.dims:
        raise ShapeError(f"target dims {target.dims} differ from online dims {online.dims}")
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    kernels.polyak_update(target.flat, online.flat.astype(target.dtype, copy=False), tau)
    return target


def relative_error(analytic, numeric, floor=1e-6):
    """Element-wise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(net: Network, loss_fn, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``loss_fn(net)`` over every parameter."""
    out = np.empty(net.n_params)
    flat = net.flat
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(net)
        flat[i] = orig - h
        down = loss_fn(net)
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return out


def gradient_check(net: Network, loss_and_grad, h: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad(net)`` returns ``(loss, flat_grad)``.
    """
    _, analytic = loss_and_grad(net)
    analytic = np.array(analytic, dtype=np.float64)
    numeric = numeric_gradient(net, lambda n: float(loss_and_grad(n)[0]), h)
    return float(relative_error(analytic, numeric, floor).max())


# Checkpoint layout (all little-endian):
#   int32  n_layers
#   n_layers x (int32 in_dim, int32 out_dim, int32 activation_code)
#   float64 values: for each layer, weights row-major (out x in), then biases
def save_params(net: Network, path) -> None:
    header = [len(net.weights)]
    for n_in, n_out, act in zip(net.dims[:-1], net.dims[1:], net.activations):
        header += [n_in, n_out, _ACT_CODES[act]]
    with open(path, "wb") as fh:
        fh.write(struct.pack(f"<{len(header)}i", *header))
        fh.write(net.flat.astype("<f8").tobytes())


def load_params(path, dtype=np.float64) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    (n_layers,) = struct.unpack_from("<i", data, 0)
    if n_layers < 1:
        raise ShapeError(f"checkpoint declares {n_layers} layers")
    fields = struct.unpack_from(f"<{3 * n_layers}i", data, 4)
    dims = [fields[0]]
    acts = []
    for k in range(n_layers):
        n_in, n_out, code = fields[3 * k:3 * k + 3]
        if n_in != dims[-1]:
            raise ShapeError(f"layer {k} input {n_in} does not chain with previous output {dims[-1]}")
        dims.append(n_out)
        acts.append(ACTIVATIONS[code])
    offset = 4 + 12 * n_layers
    values = np.frombuffer(data, dtype="<f8", offset=offset)
    net = Network(dims, acts, dtype=dtype)
    if values.size != net.n_params:
        raise ShapeError(f"checkpoint holds {values.size} values, expected {net.n_params}")
    net.flat[...] = values
    return net
