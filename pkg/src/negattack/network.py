"""Layer definitions and the forward/backward passes of small feed-forward nets.

A network is described by a :class:`ModelSpec` (a tuple of layer objects plus
the input shape and class count) and a flat list of parameter arrays. All
passes are batched: inputs carry a leading sample axis.

Backpropagation is written out per layer; there is no autodiff graph.
"""

import dataclasses
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Dense",
    "ReLU",
    "Conv2d",
    "Flatten",
    "MaxPool2d",
    "ModelSpec",
    "init_params",
    "forward",
    "backward",
    "log_softmax",
    "softmax",
    "cross_entropy",
    "cross_entropy_grad",
]


@dataclasses.dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int

    n_params = 2

    def output_shape(self, shape):
        if shape != (self.in_dim,):
            raise ValueError(f"Dense({self.in_dim}, {self.out_dim}) got input shape {shape}")
        return (self.out_dim,)

    def param_shapes(self):
        return [(self.in_dim, self.out_dim), (self.out_dim,)]

    def init(self, rng):
        # He initialisation for ReLU stacks
        w = rng.standard_normal((self.in_dim, self.out_dim)) * math.sqrt(2.0 / self.in_dim)
        return [w, np.zeros(self.out_dim)]

    def forward(self, x, params):
        w, b = params
        return x @ w + b, x

    def backward(self, dout, params, cache, param_grads=True):
        w, _ = params
        dx = dout @ w.T
        if not param_grads:
            return dx, None
        return dx, [cache.T @ dout, dout.sum(axis=0)]


@dataclasses.dataclass(frozen=True)
class ReLU:
    n_params = 0

    def output_shape(self, shape):
        return shape

    def param_shapes(self):
        return []

    def init(self, rng):
        return []

    def forward(self, x, params):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, dout, params, cache, param_grads=True):
        # subgradient at exactly 0 is 0
        return np.where(cache, dout, 0.0), []


@dataclasses.dataclass(frozen=True)
class Flatten:
    n_params = 0

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def param_shapes(self):
        return []

    def init(self, rng):
        return []

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, params, cache, param_grads=True):
        return dout.reshape(cache), []


@dataclasses.dataclass(frozen=True)
class Conv2d:
    """Valid (unpadded) 2-D convolution on ``(C, H, W)`` inputs."""

    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1

    n_params = 2

    def output_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.in_ch:
            raise ValueError(f"Conv2d expects ({self.in_ch}, H, W), got {shape}")
        _, h, w = shape
        if h < self.kernel or w < self.kernel:
            raise ValueError(f"Conv2d kernel {self.kernel} larger than input {h}x{w}")
        ho = (h - self.kernel) // self.stride + 1
        wo = (w - self.kernel) // self.stride + 1
        return (self.out_ch, ho, wo)

    def param_shapes(self):
        k = self.kernel
        return [(self.out_ch, self.in_ch, k, k), (self.out_ch,)]

    def init(self, rng):
        fan_in = self.in_ch * self.kernel * self.kernel
        w = rng.standard_normal(self.param_shapes()[0]) * math.sqrt(2.0 / fan_in)
        return [w, np.zeros(self.out_ch)]

    def _cols(self, x):
        """im2col: ``(n, C*k*k, Ho*Wo)`` patch matrix of ``x``."""
        k, s = self.kernel, self.stride
        n, c, h, w = x.shape
        ho = (h - k) // s + 1
        wo = (w - k) // s + 1
        win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, :(ho - 1) * s + 1:s, :(wo - 1) * s + 1:s]
        cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, ho * wo)
        return cols, ho, wo

    def forward(self, x, params):
        w, b = params
        cols, ho, wo = self._cols(x)
        out = np.matmul(w.reshape(self.out_ch, -1), cols)  # (n, O, Ho*Wo)
        out += b[None, :, None]
        return out.reshape(len(x), self.out_ch, ho, wo), (x.shape, cols)

    def backward(self, dout, params, cache, param_grads=True):
        w, _ = params
        shape, cols = cache
        n, c, h, wd = shape
        k, s = self.kernel, self.stride
        _, o, ho, wo = dout.shape
        d2 = dout.reshape(n, o, ho * wo)
        dcols = np.matmul(w.reshape(o, -1).T, d2).reshape(n, c, k, k, ho, wo)
        dx = np.zeros(shape)
        for i in range(k):
            for j in range(k):
                dx[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += dcols[:, :, i, j]
        if not param_grads:
            return dx, None
        dw = np.tensordot(d2, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
        return dx, [dw, dout.sum(axis=(0, 2, 3))]


@dataclasses.dataclass(frozen=True)
class MaxPool2d:
    """Non-overlapping max pooling; trailing rows/columns that do not fill a
    window are dropped. Ties route the gradient to the first maximum."""

    window: int

    n_params = 0

    def output_shape(self, shape):
        if len(shape) != 3:
            raise ValueError(f"MaxPool2d expects (C, H, W), got {shape}")
        c, h, w = shape
        if h < self.window or w < self.window:
            raise ValueError(f"MaxPool2d window {self.window} larger than input {h}x{w}")
        return (c, h // self.window, w // self.window)

    def param_shapes(self):
        return []

    def init(self, rng):
        return []

    def forward(self, x, params):
        p = self.window
        ho, wo = x.shape[2] // p, x.shape[3] // p
        out = arg = None
        for k in range(p * p):
            v = x[:, :, k // p:ho * p:p, k % p:wo * p:p]
            if out is None:
                out, arg = v.copy(), np.zeros(v.shape, dtype=np.int8)
            else:
                # strict > keeps the first maximum
                arg = np.where(v > out, np.int8(k), arg)
                out = np.maximum(out, v)
        return out, (x.shape, arg)

    def backward(self, dout, params, cache, param_grads=True):
        p = self.window
        shape, arg = cache
        ho, wo = dout.shape[2], dout.shape[3]
        dx = np.zeros(shape)
        for k in range(p * p):
            dx[:, :, k // p:ho * p:p, k % p:wo * p:p] = np.where(arg == k, dout, 0.0)
        return dx, []


LAYER_TYPES = {cls.__name__: cls for cls in (Dense, ReLU, Conv2d, Flatten, MaxPool2d)}


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    """Architecture of a classifier.

    ``input_scale`` multiplies the raw input before the first layer, so that
    callers can feed pixels in ``[0, 255]`` while the layers see ``[0, 1]``.
    """

    layers: tuple
    input_shape: tuple
    n_classes: int
    input_scale: float = 1.0 / 255.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        self.validate()

    def validate(self):
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ValueError as exc:
                raise ValueError(f"layer {i} ({type(layer).__name__}): {exc}") from None
        if shape != (self.n_classes,):
            raise ValueError(f"final output shape {shape} does not match {self.n_classes} classes")

    def param_shapes(self):
        return [s for layer in self.layers for s in layer.param_shapes()]

    def to_dict(self):
        return {
            "layers": [
                {"type": type(layer).__name__, **dataclasses.asdict(layer)} for layer in self.layers
            ],
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "input_scale": self.input_scale,
        }

    @classmethod
    def from_dict(cls, d):
        layers = []
        for entry in d["layers"]:
            entry = dict(entry)
            kind = entry.pop("type")
            if kind not in LAYER_TYPES:
                raise ValueError(f"unknown layer type {kind!r}")
            layers.append(LAYER_TYPES[kind](**entry))
        return cls(layers, tuple(d["input_shape"]), int(d["n_classes"]), float(d["input_scale"]))


def init_params(spec, rng):
    return [p for layer in spec.layers for p in layer.init(rng)]


def _split(spec, params):
    out, k = [], 0
    for layer in spec.layers:
        out.append(params[k:k + layer.n_params])
        k += layer.n_params
    return out


def forward(spec, params, x, keep_cache=False):
    """Logits for a batch ``x`` of shape ``(n, *input_shape)``."""
    h = x * spec.input_scale
    caches = []
    for layer, p in zip(spec.layers, _split(spec, params)):
        h, cache = layer.forward(h, p)
        if keep_cache:
            caches.append(cache)
    return (h, caches) if keep_cache else h


def backward(spec, params, caches, dlogits, param_grads=True):
    """Backpropagate ``dlogits`` to the raw input (and optionally the params).

    Returns ``(dx, dparams)``; ``dparams`` is ``None`` when ``param_grads`` is
    false.
    """
    grads = []
    d = dlogits
    for layer, p, cache in zip(reversed(spec.layers), reversed(_split(spec, params)),
                               reversed(caches)):
        d, g = layer.backward(d, p, cache, param_grads=param_grads)
        if param_grads:
            grads.append(g)
    dx = d * spec.input_scale
    if not param_grads:
        return dx, None
    return dx, [g for layer_grads in reversed(grads) for g in layer_grads]


def log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """Per-sample cross-entropy ``-log softmax(logits)[label]``."""
    labels = np.asarray(labels)
    logp = log_softmax(logits)
    return -logp[np.arange(len(labels)), labels]


def cross_entropy_grad(logits, labels):
    g = softmax(logits)
    g[np.arange(len(labels)), labels] -= 1.0
    return g
