"""Minimal feed-forward network engine with explicit forward and backward passes.

Layers are plain descriptors, parameters live in :class:`NetworkParams`, and
the backward pass propagates a per-sample logit gradient down to every weight
and bias. Everything is float64 and free of global state, so independent
networks can train concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

_ACTIVATIONS = ("none", "relu")


@dataclass(frozen=True)
class Dense:
    """Fully connected layer: out = x @ W + b, optionally rectified."""

    in_dim: int
    out_dim: int
    activation: str = "none"

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"dense layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.activation not in _ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def in_features(self) -> int:
        return self.in_dim

    @property
    def out_features(self) -> int:
        return self.out_dim

    def weight_shape(self) -> tuple[int, ...]:
        return (self.in_dim, self.out_dim)

    def bias_shape(self) -> tuple[int, ...]:
        return (self.out_dim,)

    def fan_in_out(self) -> tuple[int, int]:
        return self.in_dim, self.out_dim


@dataclass(frozen=True)
class Conv2d:
    """2D convolution over a (channels, height, width) input, no padding.

    The flat feature layout is channel-major: index = (c * H + i) * W + j,
    both on input and output.
    """

    in_channels: int
    out_channels: int
    height: int
    width: int
    kernel: int
    stride: int = 1
    activation: str = "relu"

    def __post_init__(self) -> None:
        if min(self.in_channels, self.out_channels, self.height, self.width, self.kernel) < 1:
            raise ShapeError("conv layer dims must be positive")
        if self.stride < 1:
            raise ShapeError("conv stride must be >= 1")
        if self.kernel > min(self.height, self.width):
            raise ShapeError(
                f"kernel {self.kernel} exceeds input {self.height}x{self.width}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def out_height(self) -> int:
        return (self.height - self.kernel) // self.stride + 1

    @property
    def out_width(self) -> int:
        return (self.width - self.kernel) // self.stride + 1

    @property
    def in_features(self) -> int:
        return self.in_channels * self.height * self.width

    @property
    def out_features(self) -> int:
        return self.out_channels * self.out_height * self.out_width

    def weight_shape(self) -> tuple[int, ...]:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)

    def bias_shape(self) -> tuple[int, ...]:
        return (self.out_channels,)

    def fan_in_out(self) -> tuple[int, int]:
        k2 = self.kernel * self.kernel
        return self.in_channels * k2, self.out_channels * k2


LayerSpec = Dense | Conv2d


@dataclass
class NetworkParams:
    """Weights and biases for a stack of layer descriptors."""

    layers: tuple[LayerSpec, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def validate(self) -> None:
        if not self.layers:
            raise ShapeError("network has no layers")
        if len(self.weights) != len(self.layers) or len(self.biases) != len(self.layers):
            raise ShapeError("parameter lists do not match layer count")
        for i, spec in enumerate(self.layers):
            if i + 1 < len(self.layers) and spec.out_features != self.layers[i + 1].in_features:
                raise ShapeError(
                    f"layer {i} emits {spec.out_features} features but layer {i + 1} "
                    f"expects {self.layers[i + 1].in_features}"
                )
            if self.weights[i].shape != spec.weight_shape():
                raise ShapeError(f"layer {i} weight shape {self.weights[i].shape} != {spec.weight_shape()}")
            if self.biases[i].shape != spec.bias_shape():
                raise ShapeError(f"layer {i} bias shape {self.biases[i].shape} != {spec.bias_shape()}")
            if not (np.all(np.isfinite(self.weights[i])) and np.all(np.isfinite(self.biases[i]))):
                raise ShapeError(f"layer {i} has non-finite parameters")

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.layers, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Gradients:
    """Per-layer gradient arrays mirroring a NetworkParams layout."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: NetworkParams) -> "Gradients":
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])


def mlp(in_dim: int, hidden: tuple[int, ...] | list[int], out_dim: int) -> tuple[LayerSpec, ...]:
    """Dense stack with rectified hidden layers and linear output."""
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for i in range(len(dims) - 1):
        act = "relu" if i < len(dims) - 2 else "none"
        layers.append(Dense(dims[i], dims[i + 1], act))
    return tuple(layers)


def conv_mlp(
    in_shape: tuple[int, int, int],
    conv_channels: tuple[int, ...] | list[int],
    hidden: tuple[int, ...] | list[int],
    out_dim: int,
    kernel: int = 3,
    stride: int = 2,
) -> tuple[LayerSpec, ...]:
    """Small convolution stack followed by a dense head.

    ``in_shape`` is (channels, height, width); each conv layer uses the given
    kernel and stride and is rectified.
    """
    c, h, w = in_shape
    layers: list[LayerSpec] = []
    for out_c in conv_channels:
        spec = Conv2d(c, out_c, h, w, kernel, stride, activation="relu")
        layers.append(spec)
        c, h, w = out_c, spec.out_height, spec.out_width
    layers.extend(mlp(c * h * w, hidden, out_dim))
    return tuple(layers)


def init_params(layers: tuple[LayerSpec, ...], seed: int | np.random.Generator) -> NetworkParams:
    """Uniform init with bound sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for spec in layers:
        fan_in, fan_out = spec.fan_in_out()
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=spec.weight_shape()))
        biases.append(np.zeros(spec.bias_shape()))
    net = NetworkParams(tuple(layers), weights, biases)
    net.validate()
    return net


def _im2col(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, oh * ow, C * k * k) patch matrix."""
    b, c, h, w = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    cols = np.empty((b, oh * ow, c * kernel * kernel), dtype=x.dtype)
    p = 0
    for i in range(oh):
        for j in range(ow):
            patch = x[:, :, i * stride : i * stride + kernel, j * stride : j * stride + kernel]
            cols[:, p] = patch.reshape(b, -1)
            p += 1
    return cols


def _col2im(dcols: np.ndarray, shape: tuple[int, int, int, int], kernel: int, stride: int) -> np.ndarray:
    """Scatter-add the inverse of _im2col."""
    b, c, h, w = shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    dx = np.zeros(shape, dtype=dcols.dtype)
    p = 0
    for i in range(oh):
        for j in range(ow):
            dx[:, :, i * stride : i * stride + kernel, j * stride : j * stride + kernel] += dcols[
                :, p
            ].reshape(b, c, kernel, kernel)
            p += 1
    return dx


def _layer_forward(spec: LayerSpec, w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    if isinstance(spec, Dense):
        pre = x @ w + b
    else:
        batch = x.shape[0]
        cols = _im2col(x.reshape(batch, spec.in_channels, spec.height, spec.width), spec.kernel, spec.stride)
        wmat = w.reshape(spec.out_channels, -1)
        pre = cols @ wmat.T + b  # (B, oh*ow, out_c)
        pre = pre.transpose(0, 2, 1).reshape(batch, spec.out_features)
    return pre


def forward_with_cache(
    net: NetworkParams, batch: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Forward pass keeping (input, pre-activation) per layer for backward."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch must be 2-D (samples x features), got shape {x.shape}")
    cache = []
    for i, spec in enumerate(net.layers):
        if x.shape[1] != spec.in_features:
            raise ShapeError(
                f"layer {i} expects {spec.in_features} input features, got {x.shape[1]}"
            )
        pre = _layer_forward(spec, net.weights[i], net.biases[i], x)
        cache.append((x, pre))
        x = np.maximum(pre, 0.0) if spec.activation == "relu" else pre
    return x, cache


def forward(net: NetworkParams, batch: np.ndarray) -> np.ndarray:
    """Logits for a (samples x features) batch."""
    logits, _ = forward_with_cache(net, batch)
    return logits


def backward_from_cache(
    net: NetworkParams, cache: list[tuple[np.ndarray, np.ndarray]], logit_grads: np.ndarray
) -> Gradients:
    """Backpropagate per-sample logit gradients; result is batch-averaged."""
    g = np.asarray(logit_grads, dtype=np.float64)
    batch = cache[0][0].shape[0]
    if g.shape != (batch, net.out_features):
        raise ShapeError(
            f"logit_grads shape {g.shape} does not match output ({batch}, {net.out_features})"
        )
    grads = Gradients([], [])
    d = g
    for i in range(len(net.layers) - 1, -1, -1):
        spec = net.layers[i]
        x, pre = cache[i]
        if spec.activation == "relu":
            d = d * (pre > 0)
        if isinstance(spec, Dense):
            grads.weights.insert(0, x.T @ d / batch)
            grads.biases.insert(0, d.mean(axis=0))
            if i > 0:
                d = d @ net.weights[i].T
        else:
            dmap = d.reshape(batch, spec.out_channels, -1).transpose(0, 2, 1)  # (B, oh*ow, out_c)
            cols = _im2col(
                x.reshape(batch, spec.in_channels, spec.height, spec.width), spec.kernel, spec.stride
            )
            wmat = net.weights[i].reshape(spec.out_channels, -1)
            dw = np.einsum("bpo,bpk->ok", dmap, cols) / batch
            grads.weights.insert(0, dw.reshape(spec.weight_shape()))
            grads.biases.insert(0, dmap.sum(axis=1).mean(axis=0))
            if i > 0:
                dcols = dmap @ wmat  # (B, oh*ow, C*k*k)
                dx = _col2im(
                    dcols,
                    (batch, spec.in_channels, spec.height, spec.width),
                    spec.kernel,
                    spec.stride,
                )
                d = dx.reshape(batch, spec.in_features)
    return grads


def backward(net: NetworkParams, batch: np.ndarray, logit_grads: np.ndarray) -> Gradients:
    """Gradient of mean_b(logit_grads[b] . logits[b]) w.r.t. every parameter."""
    _, cache = forward_with_cache(net, batch)
    return backward_from_cache(net, cache, logit_grads)
