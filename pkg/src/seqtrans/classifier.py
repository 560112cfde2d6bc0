"""1D CNN classifier and the four model variants.

The classifier is ``depth`` conv+pool blocks, a hidden dense layer with
ReLU and dropout, and a sigmoid output head producing one mortality-style
probability per example. Non-baseline variants prepend a
:class:`~seqtrans.transform.SequenceTransformer`; the classifier itself is
identical across variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .containers import decode_array, dump_json, encode_array, load_json
from .errors import ConfigError, DataError
from .nn import Conv1d, Dense, Dropout, LayerParams, MaxPool1d, ReLU, Sigmoid
from .transform import MODES, SequenceTransformer, TransformNetConfig

BASELINE = "baseline"
VARIANTS = (BASELINE,) + MODES

CHECKPOINT_FORMAT = "seqtrans-checkpoint"
CHECKPOINT_VERSION = 1


def default_dropout(variant: str) -> float:
    # transformer variants train better with slightly less regularization
    return 0.3 if variant == BASELINE else 0.2


@dataclass
class ClassifierConfig:
    depth: int = 2
    channels: int = 64
    filter_size: int = 3
    pool: int = 2
    hidden: int = 100
    dropout: float = 0.3

    def __post_init__(self):
        if self.depth not in (2, 3, 4):
            raise ConfigError(f"classifier depth must be 2, 3 or 4, got {self.depth}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")


class ConvNetClassifier:
    """Stack of conv+pool blocks feeding a dense head with sigmoid output.

    Flattening is channel-major: features of channel 0 across time come
    first, then channel 1, and so on (row-major reshape of [c, T]).
    """

    def __init__(self, in_channels: int, T: int, config: ClassifierConfig,
                 rng: np.random.Generator):
        self.config = config
        k = config.filter_size
        pad = k // 2
        self.blocks = []
        c_in, t = in_channels, T
        for _ in range(config.depth):
            conv = Conv1d(c_in, config.channels, k, stride=1, pad=pad, rng=rng)
            t = Conv1d.output_length(t, k, 1, pad)
            if t < config.pool:
                raise ConfigError(
                    f"depth {config.depth} leaves too few time steps for input length {T}")
            pool = MaxPool1d(config.pool, config.pool)
            t = MaxPool1d.output_length(t, config.pool, config.pool)
            self.blocks.append((conv, ReLU(), pool))
            c_in = config.channels
        if t < 1:
            raise ConfigError(
                f"depth {config.depth} leaves no time steps for input length {T}")
        self._flat = c_in * t
        self._last_channels = c_in
        self.hidden = Dense(self._flat, config.hidden, rng=rng)
        self.relu = ReLU()
        self.dropout = Dropout(config.dropout)
        self.output = Dense(config.hidden, 1, rng=rng)
        self.sigmoid = Sigmoid()

    def layers(self) -> list[tuple[str, LayerParams]]:
        named = [(f"block{i}.conv", conv.params)
                 for i, (conv, _, _) in enumerate(self.blocks)]
        named.append(("hidden", self.hidden.params))
        named.append(("output", self.output.params))
        return named

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        h = x
        for conv, relu, pool in self.blocks:
            h = pool.forward(relu.forward(conv.forward(h)))
        h = h.reshape(h.shape[0], -1)
        h = self.relu.forward(self.hidden.forward(h))
        h = self.dropout.forward(h, training=training, rng=rng)
        logits = self.output.forward(h)
        return self.sigmoid.forward(logits)[:, 0]

    def backward(self, grad_probs: np.ndarray) -> np.ndarray:
        g = self.sigmoid.backward(grad_probs[:, None])
        g = self.output.backward(g)
        g = self.dropout.backward(g)
        g = self.hidden.backward(self.relu.backward(g))
        g = g.reshape(-1, self._last_channels, self._flat // self._last_channels)
        for conv, relu, pool in reversed(self.blocks):
            g = conv.backward(relu.backward(pool.backward(g)))
        return g


class Model:
    """A classifier plus, for non-baseline variants, a sequence transformer.

    The classifier and transformer are seeded from independent streams of
    the same seed, so all four variants built with one seed share identical
    classifier initialization.
    """

    def __init__(self, variant: str, in_channels: int, T: int,
                 classifier_config: ClassifierConfig | None = None,
                 transform_config: TransformNetConfig | None = None,
                 seed: int = 0):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {variant!r}")
        self.variant = variant
        self.in_channels = in_channels
        self.T = T
        self.classifier_config = classifier_config or ClassifierConfig()
        self.transform_config = transform_config or TransformNetConfig()
        self.seed = seed
        clf_ss, net_ss = np.random.SeedSequence(seed).spawn(2)
        self.classifier = ConvNetClassifier(
            in_channels, T, self.classifier_config, np.random.default_rng(clf_ss))
        if variant == BASELINE:
            self.transformer = None
        else:
            self.transformer = SequenceTransformer(
                in_channels, T, self.transform_config, mode=variant,
                rng=np.random.default_rng(net_ss))

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if x.shape[1] != self.in_channels or x.shape[2] != self.T:
            raise ConfigError(
                f"model built for [*, {self.in_channels}, {self.T}] inputs, "
                f"got {list(x.shape)}")
        h = x if self.transformer is None else self.transformer.forward(x, training, rng)
        return self.classifier.forward(h, training=training, rng=rng)

    def backward(self, grad_probs: np.ndarray) -> np.ndarray:
        g = self.classifier.backward(grad_probs)
        if self.transformer is not None:
            g = self.transformer.backward(g)
        return g

    def parameters(self) -> list[tuple[str, LayerParams]]:
        named = [(f"classifier.{name}", p) for name, p in self.classifier.layers()]
        if self.transformer is not None:
            named += [(f"transform_net.{name}", p)
                      for name, p in self.transformer.layers()]
        return named

    def zero_grads(self) -> None:
        for _, p in self.parameters():
            p.zero_grads()

    def snapshot(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {name: p.copy_values() for name, p in self.parameters()}

    def restore(self, snapshot: dict[str, tuple[np.ndarray, np.ndarray]]) -> None:
        for name, p in self.parameters():
            w, b = snapshot[name]
            p.set_values(w, b)

    def transform_params(self, x: np.ndarray) -> np.ndarray:
        """Emitted (theta1, theta0, phi1, phi0) per example, mode overrides applied."""
        if self.transformer is None:
            raise ConfigError("baseline model has no transformer")
        self.transformer.forward(x, training=False)
        return self.transformer.last_params


def _config_to_dict(model: Model) -> dict:
    clf = model.classifier_config
    net = model.transform_config
    return {
        "variant": model.variant,
        "in_channels": model.in_channels,
        "T": model.T,
        "seed": model.seed,
        "classifier": {"depth": clf.depth, "channels": clf.channels,
                       "filter_size": clf.filter_size, "pool": clf.pool,
                       "hidden": clf.hidden, "dropout": clf.dropout},
        "transform_net": {"channels": list(net.channels),
                          "filter_size": net.filter_size, "pool": net.pool,
                          "hidden": net.hidden, "clamp_bound": net.clamp_bound,
                          "clamp_slope": net.clamp_slope},
    }


def save_checkpoint(model: Model, path: str | Path, experiment: dict | None = None) -> None:
    """Write a versioned, byte-stable checkpoint with a config echo."""
    params = {}
    for name, p in model.parameters():
        params[name + ".weights"] = encode_array(p.weights)
        params[name + ".bias"] = encode_array(p.bias)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": _config_to_dict(model),
        "experiment": experiment or {},
        "params": params,
    }
    dump_json(path, payload)


def load_checkpoint(path: str | Path) -> tuple[Model, dict]:
    """Rebuild a model from a checkpoint; returns (model, experiment echo)."""
    payload = load_json(path)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    cfg = payload["model"]
    clf = ClassifierConfig(**cfg["classifier"])
    netcfg = dict(cfg["transform_net"])
    netcfg["channels"] = tuple(netcfg["channels"])
    net = TransformNetConfig(**netcfg)
    model = Model(cfg["variant"], cfg["in_channels"], cfg["T"],
                  classifier_config=clf, transform_config=net, seed=cfg["seed"])
    for name, p in model.parameters():
        p.set_values(decode_array(payload["params"][name + ".weights"]),
                     decode_array(payload["params"][name + ".bias"]))
    return model, payload.get("experiment", {})
