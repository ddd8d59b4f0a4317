"""Feedforward ReLU network with hand-written backprop and first-order optimizers.

Inputs may be a single vector ``(in_dim,)`` or a batch ``(n, in_dim)``;
outputs follow the same leading shape. Everything runs in float64.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = "gridnav-mlp"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class NonFiniteError(FloatingPointError):
    pass


class NeuralNet:
    """Layers are ``(W, b)`` with ``W`` of shape ``(out_dim, in_dim)``."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: in_dim {w.shape[1]} does not chain")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "NeuralNet":
        return copy.deepcopy(self)

    def copy_from(self, other: "NeuralNet") -> None:
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def equals(self, other: "NeuralNet") -> bool:
        return self.dims == other.dims and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params()))

    def assert_finite(self) -> None:
        if not all(np.isfinite(p).all() for p in self.params()):
            raise NonFiniteError("network parameters became non-finite")

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class Gradients:
    weights: list
    biases: list

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    @classmethod
    def zeros_like(cls, net: NeuralNet) -> "Gradients":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])


def init_net(layer_dims, seed: int) -> NeuralNet:
    """Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases."""
    dims = list(layer_dims)
    if len(dims) < 2 or any(int(d) != d or d <= 0 for d in dims):
        raise ValueError(f"need at least two positive integer dimensions, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
        biases.append(np.zeros(d_out))
    return NeuralNet(weights, biases)


def forward(net: NeuralNet, x):
    """Returns ``(output, cache)``; the cache holds each layer's input and pre-activation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.in_dim or x.ndim not in (1, 2):
        raise ValueError(f"input shape {x.shape} does not match in_dim {net.in_dim}")
    inputs, pre = [], []
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        a = z if k == last else np.maximum(z, 0.0)
    return a, (inputs, pre)


def backward(net: NeuralNet, cache, output_grad) -> Gradients:
    """Reverse-mode gradients of ``sum(output * output_grad)`` w.r.t. the parameters."""
    inputs, pre = cache
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != pre[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {pre[-1].shape}")
    n = len(net.weights)
    dws, dbs = [None] * n, [None] * n
    for k in range(n - 1, -1, -1):
        if k != n - 1:
            g = g * (pre[k] > 0.0)
        a = inputs[k]
        if g.ndim == 1:
            dws[k] = np.outer(g, a)
            dbs[k] = g.copy()
        else:
            dws[k] = g.T @ a
            dbs[k] = g.sum(axis=0)
        if k:
            g = g @ net.weights[k]
    return Gradients(dws, dbs)


def _check_grads(net: NeuralNet, grads: Gradients) -> None:
    for p, g in zip(net.params(), grads.params()):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError("non-finite gradient")


def sgd_step(net: NeuralNet, grads: Gradients, lr: float) -> NeuralNet:
    _check_grads(net, grads)
    for p, g in zip(net.params(), grads.params()):
        p -= lr * g
    net.assert_finite()
    return net


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_net(cls, net: NeuralNet) -> "AdamState":
        return cls([np.zeros_like(p) for p in net.params()],
                   [np.zeros_like(p) for p in net.params()])


def adam_step(net: NeuralNet, grads: Gradients, state: AdamState, lr: float):
    """Bias-corrected Adam, in place. Returns ``(net, state)``."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    _check_grads(net, grads)
    state.t += 1
    c1 = 1.0 - ADAM_BETA1 ** state.t
    c2 = 1.0 - ADAM_BETA2 ** state.t
    for p, g, m, v in zip(net.params(), grads.params(), state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    net.assert_finite()
    return net, state


# Checkpoint text layout:
#   gridnav-mlp 1
#   dims d0 d1 ... dL
#   then for each layer k: "W k" followed by out_dim lines of in_dim values
#   (row-major), then "b k" followed by one line of out_dim values.
# Values use 17 significant digits, which round-trips float64 exactly.

def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def dump_net_lines(net: NeuralNet) -> list[str]:
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}", "dims " + " ".join(map(str, net.dims))]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W {k}")
        lines.extend(_fmt(row) for row in w)
        lines.append(f"b {k}")
        lines.append(_fmt(b))
    return lines


def parse_net_lines(lines, pos: int = 0):
    """Parse one network block starting at ``lines[pos]``; returns ``(net, next_pos)``."""
    head = lines[pos].split()
    if head != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ValueError(f"not a {CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} block: {lines[pos]!r}")
    dims_line = lines[pos + 1].split()
    if dims_line[0] != "dims":
        raise ValueError("missing dims line")
    dims = [int(d) for d in dims_line[1:]]
    pos += 2
    weights, biases = [], []
    for k, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        if lines[pos] != f"W {k}":
            raise ValueError(f"expected 'W {k}', got {lines[pos]!r}")
        rows = [np.array(lines[pos + 1 + i].split(), dtype=np.float64) for i in range(d_out)]
        pos += 1 + d_out
        if lines[pos] != f"b {k}":
            raise ValueError(f"expected 'b {k}', got {lines[pos]!r}")
        b = np.array(lines[pos + 1].split(), dtype=np.float64)
        pos += 2
        w = np.vstack(rows)
        if w.shape != (d_out, d_in) or b.shape != (d_out,):
            raise ValueError(f"layer {k} has wrong shape")
        weights.append(w)
        biases.append(b)
    return NeuralNet(weights, biases), pos


def save_net(net: NeuralNet, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(dump_net_lines(net)) + "\n")


def load_net(path) -> NeuralNet:
    with open(path) as fh:
        lines = fh.read().splitlines()
    return parse_net_lines(lines)[0]
