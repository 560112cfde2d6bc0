"""Input-conditioned affine sequence transformation with analytic gradients.

A small CNN (the transform net) maps each example to four parameters:
``theta1, theta0`` (temporal scale and shift over normalized time
coordinates in [-1, 1]) and ``phi1, phi0`` (magnitude scale and offset).
The temporal transform resamples the signal with linear interpolation at
source positions ``t = theta1 * t' + theta0``; the magnitude transform is
``phi1 * x + phi0``. One parameter quadruple applies to every channel of
an example. The identity quadruple is (1, 0, 1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import DTYPE, Conv1d, Dense, LayerParams, MaxPool1d, ReLU

TEMPORAL_ONLY = "temporal_only"
MAGNITUDE_ONLY = "magnitude_only"
FULL = "full"
MODES = (TEMPORAL_ONLY, MAGNITUDE_ONLY, FULL)

IDENTITY_PARAMS = np.array([1.0, 0.0, 1.0, 0.0])


def leaky_clamp(values, bound: float = 2.0, slope: float = 0.01) -> np.ndarray:
    """Identity on [-bound, bound]; reduced slope outside, continuous everywhere."""
    if bound <= 0 or not 0.0 < slope < 1.0:
        raise ConfigError("leaky_clamp needs bound > 0 and slope in (0, 1)")
    v = np.asarray(values, dtype=DTYPE)
    high = bound + slope * (v - bound)
    low = -bound + slope * (v + bound)
    return np.where(v > bound, high, np.where(v < -bound, low, v))


def leaky_clamp_grad(values, bound: float = 2.0, slope: float = 0.01) -> np.ndarray:
    v = np.asarray(values, dtype=DTYPE)
    return np.where(np.abs(v) > bound, slope, 1.0)


def target_coords(length: int) -> np.ndarray:
    """Normalized target positions t'_j = -1 + 2j/(length-1) in [-1, 1]."""
    if length < 2:
        raise ConfigError("target length must be at least 2")
    return -1.0 + 2.0 * np.arange(length, dtype=DTYPE) / (length - 1)


@dataclass
class SamplingGrid:
    """Per-example source positions for temporal resampling.

    ``source_coords[i, j] = scale[i] * t'_j + shift[i]`` in normalized
    units; ``scale``/``shift`` are kept so the resampler can evaluate
    fractional indices directly in index space, which makes the identity
    transform exact (the grid lands on integer indices without rounding).
    """

    source_coords: np.ndarray  # [n, T']
    target_length: int
    scale: np.ndarray  # theta1, [n]
    shift: np.ndarray  # theta0, [n]


def make_grid(theta: np.ndarray, target_length: int) -> SamplingGrid:
    """Build the affine sampling grid for per-example theta = [theta1, theta0]."""
    theta = np.asarray(theta, dtype=DTYPE)
    scale = theta[:, 0]
    shift = theta[:, 1]
    coords = scale[:, None] * target_coords(target_length)[None, :] + shift[:, None]
    return SamplingGrid(coords, target_length, scale, shift)


class TemporalResample:
    """Linear-interpolation resampler with boundary-value padding.

    Fractional source indices are ``u = theta1*(j_s - c) + (theta0 + 1)*c``
    with ``c = (T-1)/2`` and ``j_s = j*(T-1)/(T'-1)``, algebraically equal
    to ``(t + 1)/2 * (T-1)`` for the normalized source position t. Indices
    outside [0, T-1] read the nearest boundary sample and contribute no
    gradient to theta.
    """

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, grid: SamplingGrid) -> np.ndarray:
        n, d, T = x.shape
        if T < 2:
            raise ConfigError("temporal resampling needs at least 2 time steps")
        t_prime = grid.target_length
        center = (T - 1) / 2.0
        j_scaled = np.arange(t_prime, dtype=DTYPE) * ((T - 1) / (t_prime - 1))
        u = grid.scale[:, None] * (j_scaled[None, :] - center) \
            + (grid.shift[:, None] + 1.0) * center
        in_range = (u >= 0.0) & (u <= T - 1)
        uc = np.clip(u, 0.0, T - 1)
        i0 = np.minimum(np.floor(uc).astype(np.intp), T - 2)
        frac = uc - i0
        i1 = i0 + 1
        rows = np.arange(n)[:, None, None]
        chans = np.arange(d)[None, :, None]
        x0 = x[rows, chans, i0[:, None, :]]
        x1 = x[rows, chans, i1[:, None, :]]
        out = (1.0 - frac)[:, None, :] * x0 + frac[:, None, :] * x1
        self._cache = (x, i0, i1, frac, in_range, j_scaled - center, center)
        return out

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (grad wrt input values, grad wrt theta as [n, 2])."""
        x, i0, i1, frac, in_range, dtheta1_coeff, center = self._cache
        n, d, T = x.shape
        rows = np.arange(n)[:, None, None]
        chans = np.arange(d)[None, :, None]
        i0b = np.broadcast_to(i0[:, None, :], grad_out.shape)
        i1b = np.broadcast_to(i1[:, None, :], grad_out.shape)
        grad_x = np.zeros_like(x)
        np.add.at(grad_x, (rows, chans, i0b), grad_out * (1.0 - frac)[:, None, :])
        np.add.at(grad_x, (rows, chans, i1b), grad_out * frac[:, None, :])
        slope = x[rows, chans, i1[:, None, :]] - x[rows, chans, i0[:, None, :]]
        dldu = (grad_out * slope).sum(axis=1) * in_range  # [n, T']
        grad_theta = np.empty((n, 2), dtype=DTYPE)
        grad_theta[:, 0] = (dldu * dtheta1_coeff[None, :]).sum(axis=1)
        grad_theta[:, 1] = dldu.sum(axis=1) * center
        return grad_x, grad_theta


class MagnitudeTransform:
    """Elementwise affine transform x' = phi1 * x + phi0 per example."""

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        phi = np.asarray(phi, dtype=DTYPE)
        self._cache = (x, phi)
        return phi[:, 0, None, None] * x + phi[:, 1, None, None]

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (grad wrt input values, grad wrt phi as [n, 2])."""
        x, phi = self._cache
        grad_x = phi[:, 0, None, None] * grad_out
        grad_phi = np.empty((x.shape[0], 2), dtype=DTYPE)
        grad_phi[:, 0] = (grad_out * x).sum(axis=(1, 2))
        grad_phi[:, 1] = grad_out.sum(axis=(1, 2))
        return grad_x, grad_phi


@dataclass
class TransformNetConfig:
    """Architecture of the parameter-predicting CNN.

    ``clamp_bound=None`` disables the output saturation (used by the
    runaway-parameter ablation); otherwise head outputs pass through
    ``leaky_clamp(bound, slope)``.
    """

    channels: tuple[int, int] = (16, 16)
    filter_size: int = 5
    pool: int = 2
    hidden: int = 32
    clamp_bound: float | None = 2.0
    clamp_slope: float = 0.01


class TransformNet:
    """Two conv+pool blocks and two dense layers emitting 4 parameters.

    The head starts at the identity: zero weights and bias (1, 0, 1, 0),
    so an untrained transformer leaves its input untouched.
    """

    def __init__(self, in_channels: int, T: int, config: TransformNetConfig,
                 rng: np.random.Generator):
        self.config = config
        k = config.filter_size
        pad = k // 2
        c1, c2 = config.channels
        self.conv1 = Conv1d(in_channels, c1, k, stride=1, pad=pad, rng=rng)
        self.relu1 = ReLU()
        self.pool1 = MaxPool1d(config.pool, config.pool)
        self.conv2 = Conv1d(c1, c2, k, stride=1, pad=pad, rng=rng)
        self.relu2 = ReLU()
        self.pool2 = MaxPool1d(config.pool, config.pool)

        t = Conv1d.output_length(T, k, 1, pad)
        t = MaxPool1d.output_length(t, config.pool, config.pool)
        t = Conv1d.output_length(t, k, 1, pad)
        t = MaxPool1d.output_length(t, config.pool, config.pool)
        if t < 1:
            raise ConfigError(
                f"input length {T} too short for the configured filters/pools")
        self._flat = c2 * t
        self.hidden = Dense(self._flat, config.hidden, rng=rng)
        self.relu3 = ReLU()
        self.head = Dense(config.hidden, 4, rng=rng)
        self.head.params.weights[...] = 0.0
        self.head.params.bias[...] = IDENTITY_PARAMS
        self._raw = None

    def layers(self) -> list[tuple[str, LayerParams]]:
        return [("conv1", self.conv1.params), ("conv2", self.conv2.params),
                ("hidden", self.hidden.params), ("head", self.head.params)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.pool1.forward(self.relu1.forward(self.conv1.forward(x)))
        h = self.pool2.forward(self.relu2.forward(self.conv2.forward(h)))
        h = h.reshape(h.shape[0], -1)
        h = self.relu3.forward(self.hidden.forward(h))
        raw = self.head.forward(h)
        self._raw = raw
        cfg = self.config
        if cfg.clamp_bound is None:
            return raw
        return leaky_clamp(raw, cfg.clamp_bound, cfg.clamp_slope)

    def backward(self, grad_params: np.ndarray) -> np.ndarray:
        cfg = self.config
        if cfg.clamp_bound is not None:
            grad_params = grad_params * leaky_clamp_grad(
                self._raw, cfg.clamp_bound, cfg.clamp_slope)
        g = self.head.backward(grad_params)
        g = self.hidden.backward(self.relu3.backward(g))
        g = g.reshape(-1, self.conv2.out_channels,
                      self._flat // self.conv2.out_channels)
        g = self.conv2.backward(self.relu2.backward(self.pool2.backward(g)))
        g = self.conv1.backward(self.relu1.backward(self.pool1.backward(g)))
        return g


class SequenceTransformer:
    """Predicts per-example (theta, phi) and applies both affine transforms.

    ``mode`` freezes the unused pair at identity for the ablations: in
    ``temporal_only`` the emitted phi is overridden with (1, 0) and gets no
    gradient; ``magnitude_only`` does the same for theta; ``full`` applies
    both. The head always emits 4 values regardless of mode.
    """

    def __init__(self, in_channels: int, T: int, config: TransformNetConfig,
                 mode: str, rng: np.random.Generator):
        if mode not in MODES:
            raise ConfigError(f"unknown transformer mode {mode!r}")
        self.mode = mode
        self.net = TransformNet(in_channels, T, config, rng)
        self.resample = TemporalResample()
        self.magnitude = MagnitudeTransform()
        self.last_params = None  # [n, 4] after mode overrides, set by forward

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        params = self.net.forward(x)
        theta = params[:, :2]
        phi = params[:, 2:]
        n = x.shape[0]
        if self.mode == MAGNITUDE_ONLY:
            theta = np.tile(IDENTITY_PARAMS[:2], (n, 1))
        elif self.mode == TEMPORAL_ONLY:
            phi = np.tile(IDENTITY_PARAMS[2:], (n, 1))
        grid = make_grid(theta, x.shape[2])
        resampled = self.resample.forward(x, grid)
        out = self.magnitude.forward(resampled, phi)
        self.last_params = np.column_stack([theta, phi])
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_resampled, grad_phi = self.magnitude.backward(grad_out)
        grad_x, grad_theta = self.resample.backward(grad_resampled)
        if self.mode == MAGNITUDE_ONLY:
            grad_theta[...] = 0.0
        elif self.mode == TEMPORAL_ONLY:
            grad_phi[...] = 0.0
        grad_params = np.hstack([grad_theta, grad_phi])
        grad_x += self.net.backward(grad_params)
        return grad_x

    def layers(self) -> list[tuple[str, LayerParams]]:
        return self.net.layers()
