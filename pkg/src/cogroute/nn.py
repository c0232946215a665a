"""Small dense networks with hand-written reverse mode and Adam.

Inputs may be a single vector of shape (in,) or a batch of shape (B, in).
Backward always returns gradients of sum(output * output_grad), summed over
the batch.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
SOFTMAX = "softmax"
IDENTITY = "identity"
ACTIVATIONS = (RELU, SOFTMAX, IDENTITY)
_ACT_CODES = {IDENTITY: 0, RELU: 1, SOFTMAX: 2}
_CODE_ACTS = {v: k for k, v in _ACT_CODES.items()}

MAGIC = b"DNET0001"


class ShapeError(ValueError):
    pass


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = RELU

    @property
    def shape(self):
        return self.W.shape


class DenseNet:
    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ShapeError("network needs at least one layer")
        for i, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise ShapeError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.activation == SOFTMAX and i != len(layers) - 1:
                raise ShapeError("softmax is only allowed on the final layer")
            if layer.b.shape != (layer.W.shape[0],):
                raise ShapeError(f"layer {i}: bias shape {layer.b.shape} vs weights {layer.W.shape}")
            if i and layer.W.shape[1] != layers[i - 1].W.shape[0]:
                raise ShapeError(f"layer {i}: in-dim {layer.W.shape[1]} != previous out-dim "
                                 f"{layers[i - 1].W.shape[0]}")
        self.layers = layers

    @classmethod
    def build(cls, sizes, activations, rng: np.random.Generator, final_init: float | None = None):
        """He-uniform hidden init; `final_init` overrides the last layer with U(-x, x)."""
        if len(activations) != len(sizes) - 1:
            raise ShapeError("need one activation per layer")
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            if last and final_init is not None:
                W = rng.uniform(-final_init, final_init, size=(n_out, n_in))
                b = rng.uniform(-final_init, final_init, size=n_out)
            else:
                limit = np.sqrt(6.0 / n_in)
                W = rng.uniform(-limit, limit, size=(n_out, n_in))
                b = np.zeros(n_out)
            layers.append(Layer(W, b, activations[i]))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class Gradients:
    dW: list = field(default_factory=list)
    db: list = field(default_factory=list)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for dW, db in zip(self.dW, self.db):
            out += [dW, db]
        return out


def forward(net: DenseNet, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.in_dim or x.ndim > 2:
        raise ShapeError(f"input shape {x.shape} does not match in-dim {net.in_dim}")
    tape = []
    h = x
    for layer in net.layers:
        z = h @ layer.W.T + layer.b
        if layer.activation == RELU:
            out = np.maximum(z, 0.0)
        elif layer.activation == SOFTMAX:
            out = softmax(z)
        else:
            out = z
        tape.append((h, z, out))
        h = out
    return h, tape


def backward(net: DenseNet, tape, output_grad):
    g = np.asarray(output_grad, dtype=np.float64)
    if len(tape) != len(net.layers) or g.shape != tape[-1][2].shape:
        raise ShapeError(f"output_grad shape {g.shape} does not match the forward tape")
    grads = Gradients([None] * len(net.layers), [None] * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        h, z, out = tape[i]
        if layer.activation == RELU:
            g = g * (z > 0)
        elif layer.activation == SOFTMAX:
            g = out * (g - (g * out).sum(axis=-1, keepdims=True))
        if g.ndim == 1:
            grads.dW[i] = np.outer(g, h)
            grads.db[i] = g.copy()
        else:
            grads.dW[i] = g.T @ h
            grads.db[i] = g.sum(axis=0)
        g = g @ layer.W
    return grads, g


@dataclass
class AdamState:
    m: list
    v: list
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_net(cls, net: DenseNet, lr: float, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in net.params()],
                   [np.zeros_like(p) for p in net.params()], lr, **kw)


def adam_step(net: DenseNet, grads: Gradients, adam: AdamState) -> DenseNet:
    """In-place Adam descent step; returns `net` for chaining."""
    params = net.params()
    garr = grads.arrays()
    if len(garr) != len(params) or any(g.shape != p.shape for g, p in zip(garr, params)):
        raise ShapeError("gradient shapes do not match network parameters")
    adam.step += 1
    b1, b2 = adam.beta1, adam.beta2
    c1 = 1.0 - b1 ** adam.step
    c2 = 1.0 - b2 ** adam.step
    for p, g, m, v in zip(params, garr, adam.m, adam.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= adam.lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)
    return net


def soft_update(target: DenseNet, online: DenseNet, tau: float) -> DenseNet:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    tp, op = target.params(), online.params()
    if len(tp) != len(op) or any(a.shape != b.shape for a, b in zip(tp, op)):
        raise ShapeError("target and online networks differ in shape")
    for t, o in zip(tp, op):
        t *= 1.0 - tau
        t += tau * o
    return target


# Checkpoint layout, all little-endian:
#   magic "DNET0001"
#   u32 layer count
#   per layer: u32 in_dim, u32 out_dim, u32 activation code (0 identity, 1 relu, 2 softmax)
#   per layer, in order: W (out x in, row-major) then b, as float64

def dumps(net: DenseNet) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(net.layers)))
    for layer in net.layers:
        n_out, n_in = layer.W.shape
        buf.write(struct.pack("<III", n_in, n_out, _ACT_CODES[layer.activation]))
    for layer in net.layers:
        buf.write(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> DenseNet:
    if data[:8] != MAGIC:
        raise ValueError("not a dense-network checkpoint")
    (count,) = struct.unpack_from("<I", data, 8)
    off = 12
    dims = []
    for _ in range(count):
        n_in, n_out, code = struct.unpack_from("<III", data, off)
        off += 12
        if code not in _CODE_ACTS:
            raise ValueError(f"unknown activation code {code}")
        dims.append((n_in, n_out, _CODE_ACTS[code]))
    layers = []
    for n_in, n_out, act in dims:
        W = np.frombuffer(data, dtype="<f8", count=n_in * n_out, offset=off).reshape(n_out, n_in)
        off += 8 * n_in * n_out
        b = np.frombuffer(data, dtype="<f8", count=n_out, offset=off)
        off += 8 * n_out
        layers.append(Layer(W.astype(np.float64), b.astype(np.float64), act))
    if off != len(data):
        raise ValueError("trailing bytes in network checkpoint")
    return DenseNet(layers)


def save(net: DenseNet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(net))


def load(path) -> DenseNet:
    with open(path, "rb") as fh:
        return loads(fh.read())
