"""Experiment configuration: a single versioned JSON format.

An experiment is reproducible from its config file alone: it names the
variant, data source, architectures, optimizer, seeds, and bootstrap
settings. Validation failures raise :class:`ConfigError` with the
offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .classifier import ClassifierConfig, VARIANTS, default_dropout
from .containers import load_json
from .errors import ConfigError
from .training import OptimizerSettings
from .transform import TransformNetConfig

CONFIG_VERSION = 1

_DATA_FORMS = ("synthetic", "dataset", "events")


def _expect(obj: dict, key: str, kind, default, context: str):
    value = obj.get(key, default)
    if value is None:
        return None
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{context}.{key}: expected {kind.__name__}, "
                          f"got {type(value).__name__}")
    return value


@dataclass
class ExperimentConfig:
    variant: str = "full"
    data: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)
    dropout: float | None = None  # None -> per-variant default
    transform_net: TransformNetConfig = field(default_factory=TransformNetConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    batch_size: int = 15
    epochs: int = 10
    split_seed: int = 0
    train_seed: int = 0
    stratified: bool = True
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    bootstrap_resamples: int = 1000
    bootstrap_level: float = 0.95
    bootstrap_seed: int = 0

    def classifier_config(self, variant: str | None = None) -> ClassifierConfig:
        variant = variant or self.variant
        dropout = self.dropout if self.dropout is not None else default_dropout(variant)
        return ClassifierConfig(dropout=dropout, **self.classifier)

    def with_overrides(self, variant: str | None = None,
                       seed: int | None = None) -> "ExperimentConfig":
        cfg = ExperimentConfig(**{**self.__dict__})
        if variant is not None:
            if variant not in VARIANTS:
                raise ConfigError(f"unknown variant {variant!r}")
            cfg.variant = variant
        if seed is not None:
            cfg.train_seed = seed
        return cfg

    def to_dict(self) -> dict:
        net = self.transform_net
        opt = self.optimizer
        return {
            "version": CONFIG_VERSION,
            "variant": self.variant,
            "data": self.data,
            "classifier": dict(self.classifier),
            "dropout": self.dropout,
            "transform_net": {"channels": list(net.channels),
                              "filter_size": net.filter_size, "pool": net.pool,
                              "hidden": net.hidden, "clamp_bound": net.clamp_bound,
                              "clamp_slope": net.clamp_slope},
            "optimizer": {"lr": opt.lr, "beta1": opt.beta1,
                          "beta2": opt.beta2, "eps": opt.eps},
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "split_seed": self.split_seed,
            "train_seed": self.train_seed,
            "stratified": self.stratified,
            "fractions": list(self.fractions),
            "bootstrap": {"resamples": self.bootstrap_resamples,
                          "level": self.bootstrap_level,
                          "seed": self.bootstrap_seed},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        version = raw.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        known = {"version", "variant", "data", "classifier", "dropout",
                 "transform_net", "optimizer", "batch_size", "epochs",
                 "split_seed", "train_seed", "stratified", "fractions",
                 "bootstrap"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        variant = _expect(raw, "variant", str, "full", "config")
        if variant not in VARIANTS:
            raise ConfigError(f"config.variant: unknown variant {variant!r}")

        data = _expect(raw, "data", dict, {}, "config") or {}
        forms = [f for f in _DATA_FORMS if f in data]
        if len(forms) != 1:
            raise ConfigError(
                "config.data must contain exactly one of "
                f"{_DATA_FORMS}, got {sorted(data)}")
        if forms[0] == "events":
            for key in ("events", "schema", "labels"):
                if not isinstance(data.get(key), str):
                    raise ConfigError(f"config.data.{key}: expected a file path")

        clf_raw = _expect(raw, "classifier", dict, {}, "config") or {}
        clf_known = {"depth", "channels", "filter_size", "pool", "hidden"}
        bad = set(clf_raw) - clf_known
        if bad:
            raise ConfigError(f"config.classifier: unknown keys {sorted(bad)} "
                              "(dropout is configured at the top level)")
        classifier = {k: _expect(clf_raw, k, int, None, "config.classifier")
                      for k in clf_raw}

        dropout = _expect(raw, "dropout", float, None, "config")
        if dropout is not None and not 0.0 <= dropout < 1.0:
            raise ConfigError(f"config.dropout: must lie in [0, 1), got {dropout}")

        net_raw = _expect(raw, "transform_net", dict, {}, "config") or {}
        net_kwargs = dict(net_raw)
        if "channels" in net_kwargs:
            net_kwargs["channels"] = tuple(net_kwargs["channels"])
        try:
            transform_net = TransformNetConfig(**net_kwargs)
        except TypeError as exc:
            raise ConfigError(f"config.transform_net: {exc}") from exc

        opt_raw = _expect(raw, "optimizer", dict, {}, "config") or {}
        try:
            optimizer = OptimizerSettings(**{k: float(v) for k, v in opt_raw.items()})
        except TypeError as exc:
            raise ConfigError(f"config.optimizer: {exc}") from exc

        boot = _expect(raw, "bootstrap", dict, {}, "config") or {}
        fractions = raw.get("fractions", (0.70, 0.15, 0.15))
        if len(fractions) != 3:
            raise ConfigError("config.fractions must have three entries")

        return cls(
            variant=variant,
            data=data,
            classifier=classifier,
            dropout=dropout,
            transform_net=transform_net,
            optimizer=optimizer,
            batch_size=_expect(raw, "batch_size", int, 15, "config"),
            epochs=_expect(raw, "epochs", int, 10, "config"),
            split_seed=_expect(raw, "split_seed", int, 0, "config"),
            train_seed=_expect(raw, "train_seed", int, 0, "config"),
            stratified=_expect(raw, "stratified", bool, True, "config"),
            fractions=tuple(float(f) for f in fractions),
            bootstrap_resamples=_expect(boot, "resamples", int, 1000, "config.bootstrap"),
            bootstrap_level=_expect(boot, "level", float, 0.95, "config.bootstrap"),
            bootstrap_seed=_expect(boot, "seed", int, 0, "config.bootstrap"),
        )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_json(path))
