"""Dense float64 layers with analytic backward passes.

Sequence layers use the [batch, channels, time] layout; dense layers use
[batch, features]. Every layer caches whatever its backward pass needs on
the instance, so exactly one ``forward`` must precede each ``backward`` on
a given instance. Parameter gradients accumulate with ``+=``; call
``zero_grads`` before starting a new optimizer step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

DTYPE = np.float64

# BCE probability clamp; keeps log() finite for saturated sigmoids.
PROB_EPS = 1e-7


def as_tensor(values) -> np.ndarray:
    """Coerce to a contiguous float64 array."""
    return np.ascontiguousarray(values, dtype=DTYPE)


@dataclass
class LayerParams:
    """Weights and bias of one layer plus their gradient accumulators."""

    weights: np.ndarray
    bias: np.ndarray
    grad_weights: np.ndarray | None = None
    grad_bias: np.ndarray | None = None

    def __post_init__(self):
        self.weights = as_tensor(self.weights)
        self.bias = as_tensor(self.bias)
        if self.grad_weights is None:
            self.grad_weights = np.zeros_like(self.weights)
        if self.grad_bias is None:
            self.grad_bias = np.zeros_like(self.bias)

    def zero_grads(self) -> None:
        self.grad_weights[...] = 0.0
        self.grad_bias[...] = 0.0

    def copy_values(self) -> tuple[np.ndarray, np.ndarray]:
        return self.weights.copy(), self.bias.copy()

    def set_values(self, weights: np.ndarray, bias: np.ndarray) -> None:
        self.weights[...] = weights
        self.bias[...] = bias


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(1.0 / max(1, fan_in))
    return rng.uniform(-limit, limit, size=shape)


class Conv1d:
    """1D convolution over [n, c_in, T] with zero padding on both ends."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, pad: int = 0, rng: np.random.Generator | None = None):
        if kernel_size < 1 or stride < 1 or pad < 0:
            raise ConfigError("conv1d needs kernel_size >= 1, stride >= 1, pad >= 0")
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.pad = pad
        weights = _uniform_init(rng, (out_channels, in_channels, kernel_size),
                                in_channels * kernel_size)
        self.params = LayerParams(weights, np.zeros(out_channels))
        self._cache = None

    @staticmethod
    def output_length(T: int, kernel_size: int, stride: int, pad: int) -> int:
        return (T + 2 * pad - kernel_size) // stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c_in, T = x.shape
        if c_in != self.in_channels:
            raise ConfigError(
                f"conv1d expects {self.in_channels} input channels, got {c_in}")
        k, s, p = self.kernel_size, self.stride, self.pad
        if T + 2 * p < k:
            raise ConfigError(
                f"input length {T} with pad {p} is shorter than filter {k}")
        padded = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        t_out = self.output_length(T, k, s, p)
        w, b = self.params.weights, self.params.bias
        out = np.zeros((n, self.out_channels, t_out), dtype=DTYPE)
        for m in range(k):
            window = padded[:, :, m:m + (t_out - 1) * s + 1:s]
            # window: [n, c_in, t_out] x w[:, :, m]: [c_out, c_in]
            out += np.tensordot(window, w[:, :, m], axes=([1], [1])).transpose(0, 2, 1)
        out += b[None, :, None]
        self._cache = (padded, T, t_out)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        padded, T, t_out = self._cache
        k, s, p = self.kernel_size, self.stride, self.pad
        w = self.params.weights
        self.params.grad_bias += grad_out.sum(axis=(0, 2))
        grad_padded = np.zeros_like(padded)
        for m in range(k):
            sl = slice(m, m + (t_out - 1) * s + 1, s)
            window = padded[:, :, sl]
            self.params.grad_weights[:, :, m] += np.tensordot(
                grad_out, window, axes=([0, 2], [0, 2]))
            grad_padded[:, :, sl] += np.tensordot(
                grad_out, w[:, :, m], axes=([1], [0])).transpose(0, 2, 1)
        return grad_padded[:, :, p:p + T] if p else grad_padded


class MaxPool1d:
    """Max pooling over [n, c, T]; ties resolve to the lowest index."""

    def __init__(self, window: int, stride: int):
        if window < 1 or stride < 1:
            raise ConfigError("maxpool1d needs window >= 1 and stride >= 1")
        self.window = window
        self.stride = stride
        self._cache = None

    @staticmethod
    def output_length(T: int, window: int, stride: int) -> int:
        return (T - window) // stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, T = x.shape
        if self.window > T:
            raise ConfigError(f"pool window {self.window} exceeds input length {T}")
        windows = np.lib.stride_tricks.sliding_window_view(
            x, self.window, axis=2)[:, :, ::self.stride, :]
        out = windows.max(axis=3)
        argmax = windows.argmax(axis=3)  # first maximum on ties
        self._cache = (x.shape, argmax)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_shape, argmax = self._cache
        n, c, t_out = grad_out.shape
        grad_in = np.zeros(x_shape, dtype=DTYPE)
        src = np.arange(t_out)[None, None, :] * self.stride + argmax
        np.add.at(grad_in,
                  (np.arange(n)[:, None, None], np.arange(c)[None, :, None], src),
                  grad_out)
        return grad_in


class Dense:
    """Affine layer: out = x @ weights + bias, weights shaped [in, out]."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        weights = _uniform_init(rng, (in_features, out_features), in_features)
        self.params = LayerParams(weights, np.zeros(out_features))
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_features:
            raise ConfigError(
                f"dense expects {self.in_features} input features, got {x.shape[1]}")
        self._cache = x
        return x @ self.params.weights + self.params.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._cache
        self.params.grad_weights += x.T @ grad_out
        self.params.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.params.weights.T


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad_out, 0.0)


class Dropout:
    """Inverted dropout: survivors scale by 1/(1-rate); identity in eval mode."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigError("dropout in training mode requires an rng")
        self._mask = rng.random(x.shape) >= self.rate
        return x * self._mask / (1.0 - self.rate)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask / (1.0 - self.rate)


class Sigmoid:
    def __init__(self):
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        # keep the open-interval contract even when exp() saturates
        np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0), out=out)
        self._out = out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._out * (1.0 - self._out)


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the probabilities.

    Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before the log;
    where the clamp binds, the gradient is zero.
    """
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be binary (0/1)")
    y = labels.astype(DTYPE)
    p = np.clip(probabilities, PROB_EPS, 1.0 - PROB_EPS)
    n = p.shape[0]
    loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))
    grad = (-y / p + (1.0 - y) / (1.0 - p)) / n
    grad = np.where(p == probabilities, grad, 0.0)
    return loss, grad
