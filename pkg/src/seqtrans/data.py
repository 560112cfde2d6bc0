"""Datasets: synthetic invariance benchmark, events-file ingestion, splits.

The synthetic generator builds two classes that differ only in a bump
pattern riding on per-channel sine carriers, then hides each example
behind an independent affine nuisance (time scale/shift, amplitude,
offset) plus observation noise. The nuisance quadruple is exactly the kind
of variation an affine temporal+magnitude transform can undo, and the
generator records it as ground truth.

The events pipeline ingests (admission_id, hour, feature, value) rows into
an hourly-binned [n, d, T] tensor with carry-forward imputation, one-hot
categoricals, per-feature observation masks, and training-split
normalization statistics carried by a schema file.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .containers import decode_array, dump_json, encode_array, load_json
from .errors import ConfigError, DataError
from .nn import DTYPE
from .transform import target_coords

DATASET_FORMAT = "seqtrans-dataset"
DATASET_VERSION = 1


@dataclass
class SequenceBatch:
    """Dense [n, d, T] float64 values with binary labels and string ids."""

    values: np.ndarray
    labels: np.ndarray
    ids: list[str]
    channel_names: list[str]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=DTYPE)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.values.ndim != 3:
            raise DataError("batch values must have shape [n, d, T]")
        n = self.values.shape[0]
        if len(self.labels) != n or len(self.ids) != n:
            raise DataError("labels and ids must match the number of examples")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be binary (0/1)")
        if not np.all(np.isfinite(self.values)):
            raise DataError("batch values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> int:
        return self.values.shape[2]

    def subset(self, indices) -> "SequenceBatch":
        idx = np.asarray(indices, dtype=np.intp)
        return SequenceBatch(self.values[idx], self.labels[idx],
                             [self.ids[i] for i in idx], list(self.channel_names))


@dataclass
class TemplateSpec:
    """Class templates: sine carriers plus class-specific Gaussian bumps.

    Class 0 carries a single bump of amplitude ``bump_amp``; class 1 two
    bumps of amplitude ``bump_amp / sqrt(2)`` centered ``bump_separation``
    apart, keeping the bump energy of the two classes equal.
    """

    carrier_freqs: tuple[float, ...] = (2.0, 3.0, 1.0, 4.0)
    carrier_amp: float = 1.0
    bump_channels: tuple[int, ...] = (0, 1)
    bump_center: float = 0.15
    bump_width: float = 0.10
    bump_separation: float = 0.26
    bump_amp: float = 1.6


@dataclass
class SyntheticSpec:
    n_per_class: int = 1000
    d: int = 4
    T: int = 48
    noise_sd: float = 0.2
    scale_range: tuple[float, float] = (0.7, 1.4)
    shift_range: tuple[float, float] = (-0.3, 0.3)
    amplitude_range: tuple[float, float] = (0.6, 1.6)
    offset_range: tuple[float, float] = (-0.5, 0.5)
    templates: TemplateSpec = field(default_factory=TemplateSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ConfigError("n_per_class must be at least 1")
        if self.T < 16:
            raise ConfigError("synthetic T must be at least 16")
        if self.d < 1:
            raise ConfigError("d must be at least 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")
        for name in ("scale_range", "shift_range", "amplitude_range", "offset_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"{name} must be (low, high) with low <= high")

    def to_dict(self) -> dict:
        t = self.templates
        return {
            "version": 1,
            "n_per_class": self.n_per_class, "d": self.d, "T": self.T,
            "noise_sd": self.noise_sd,
            "scale_range": list(self.scale_range),
            "shift_range": list(self.shift_range),
            "amplitude_range": list(self.amplitude_range),
            "offset_range": list(self.offset_range),
            "seed": self.seed,
            "templates": {
                "carrier_freqs": list(t.carrier_freqs),
                "carrier_amp": t.carrier_amp,
                "bump_channels": list(t.bump_channels),
                "bump_center": t.bump_center,
                "bump_width": t.bump_width,
                "bump_separation": t.bump_separation,
                "bump_amp": t.bump_amp,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        if not isinstance(data, dict):
            raise ConfigError("synthetic spec must be a JSON object")
        data = dict(data)
        data.pop("version", None)
        templates = data.pop("templates", None)
        allowed = {"n_per_class", "d", "T", "noise_sd", "scale_range",
                   "shift_range", "amplitude_range", "offset_range", "seed"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown synthetic spec fields: {sorted(unknown)}")
        kwargs = {}
        for key in ("scale_range", "shift_range", "amplitude_range", "offset_range"):
            if key in data:
                kwargs[key] = tuple(data.pop(key))
        kwargs.update(data)
        if templates is not None:
            t = dict(templates)
            for key in ("carrier_freqs", "bump_channels"):
                if key in t:
                    t[key] = tuple(t[key])
            kwargs["templates"] = TemplateSpec(**t)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid synthetic spec: {exc}") from exc


def class_template(spec: SyntheticSpec, label: int, coords: np.ndarray) -> np.ndarray:
    """Evaluate the clean class template at normalized coordinates.

    Returns [d, len(coords)]. This is the noise- and nuisance-free signal,
    used both by the generator and as the matched-filter oracle in tests.
    """
    t = spec.templates
    coords = np.asarray(coords, dtype=DTYPE)
    out = np.empty((spec.d, coords.size), dtype=DTYPE)
    for k in range(spec.d):
        freq = t.carrier_freqs[k % len(t.carrier_freqs)]
        out[k] = t.carrier_amp * np.sin(np.pi * freq * (coords + 1.0))
    def bump(center):
        return np.exp(-0.5 * ((coords - center) / t.bump_width) ** 2)
    if label == 0:
        pattern = t.bump_amp * bump(t.bump_center)
    else:
        half = t.bump_separation / 2.0
        pattern = (t.bump_amp / math.sqrt(2.0)) * (
            bump(t.bump_center - half) + bump(t.bump_center + half))
    for k in t.bump_channels:
        if k < spec.d:
            out[k] += pattern
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[SequenceBatch, dict[str, np.ndarray]]:
    """Deterministic benchmark batch plus per-example nuisance ground truth."""
    rng = np.random.default_rng(spec.seed)
    n = 2 * spec.n_per_class
    labels = np.repeat([0, 1], spec.n_per_class)
    scale = rng.uniform(*spec.scale_range, size=n)
    shift = rng.uniform(*spec.shift_range, size=n)
    amplitude = rng.uniform(*spec.amplitude_range, size=n)
    offset = rng.uniform(*spec.offset_range, size=n)
    noise = rng.normal(0.0, 1.0, size=(n, spec.d, spec.T)) if spec.noise_sd > 0 \
        else np.zeros((n, spec.d, spec.T))
    base = target_coords(spec.T)
    values = np.empty((n, spec.d, spec.T), dtype=DTYPE)
    for i in range(n):
        coords = scale[i] * base + shift[i]
        clean = class_template(spec, int(labels[i]), coords)
        values[i] = amplitude[i] * clean + offset[i] + spec.noise_sd * noise[i]
    ids = [f"syn-{i:05d}" for i in range(n)]
    channel_names = [f"ch{k}" for k in range(spec.d)]
    batch = SequenceBatch(values, labels, ids, channel_names)
    nuisance = {"time_scale": scale, "time_shift": shift,
                "amplitude": amplitude, "offset": offset}
    return batch, nuisance


def _largest_remainder(n: int, fractions) -> list[int]:
    quotas = [f * n for f in fractions]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda s: (-(quotas[s] - counts[s]), s))
    for s in order[:leftover]:
        counts[s] += 1
    return counts


def split(batch: SequenceBatch, fractions=(0.70, 0.15, 0.15), seed: int = 0,
          stratified: bool = True):
    """Disjoint, exhaustive, seed-deterministic splits of a batch.

    Stratified mode keeps each split's label prevalence within one example
    of the overall prevalence. Raises if any split would be empty.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    n = batch.n
    global_counts = _largest_remainder(n, fractions)
    if min(global_counts) < 1:
        raise ConfigError(f"split of {n} examples by {tuple(fractions)} "
                          "leaves an empty split")
    rng = np.random.default_rng(seed)
    n_splits = len(fractions)
    assignments: list[list[int]] = [[] for _ in range(n_splits)]
    if stratified:
        classes = np.unique(batch.labels)
        deficits = list(global_counts)
        alloc = {}
        leftovers = {}
        entries = []
        for cls in classes:
            n_c = int((batch.labels == cls).sum())
            floors = [int(math.floor(f * n_c)) for f in fractions]
            for s in range(n_splits):
                alloc[(int(cls), s)] = floors[s]
                deficits[s] -= floors[s]
                entries.append((f_part := fractions[s] * n_c - floors[s], int(cls), s))
            leftovers[int(cls)] = n_c - sum(floors)
        entries.sort(key=lambda e: (-e[0], e[2], e[1]))
        for _, cls, s in entries:
            if leftovers[cls] > 0 and deficits[s] > 0:
                alloc[(cls, s)] += 1
                leftovers[cls] -= 1
                deficits[s] -= 1
        for cls in classes:
            idx = np.flatnonzero(batch.labels == cls)
            perm = idx[rng.permutation(idx.size)]
            start = 0
            for s in range(n_splits):
                take = alloc[(int(cls), s)]
                assignments[s].extend(perm[start:start + take].tolist())
                start += take
    else:
        perm = rng.permutation(n)
        start = 0
        for s in range(n_splits):
            assignments[s].extend(perm[start:start + global_counts[s]].tolist())
            start += global_counts[s]
    return tuple(batch.subset(sorted(a)) for a in assignments)


# --- events-file ingestion -------------------------------------------------

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class Feature:
    name: str
    kind: str
    mean: float = 0.0
    std: float = 1.0
    values: tuple[str, ...] = ()
    static: bool = False

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL and not self.values:
            raise DataError(f"feature {self.name!r}: categorical needs a value list")
        if self.kind == NUMERIC and self.std <= 0:
            raise DataError(f"feature {self.name!r}: std must be positive")


@dataclass
class FeatureSchema:
    features: list[Feature]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names in schema")
        self.by_name = {f.name: f for f in self.features}

    def channel_names(self) -> list[str]:
        names = []
        for f in self.features:
            if f.kind == NUMERIC:
                names.append(f.name)
            else:
                names.extend(f"{f.name}={v}" for v in f.values)
        names.extend(f"{f.name}.mask" for f in self.features)
        return names

    def value_channel_count(self) -> int:
        return sum(1 if f.kind == NUMERIC else len(f.values) for f in self.features)

    def save(self, path: str | Path) -> None:
        payload = {"version": 1, "features": []}
        for f in self.features:
            entry = {"name": f.name, "kind": f.kind}
            if f.kind == NUMERIC:
                entry["mean"] = f.mean
                entry["std"] = f.std
            else:
                entry["values"] = list(f.values)
            if f.static:
                entry["static"] = True
            payload["features"].append(entry)
        dump_json(path, payload)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        payload = load_json(path)
        if "features" not in payload:
            raise DataError(f"{path}: schema file missing 'features'")
        features = []
        for entry in payload["features"]:
            features.append(Feature(
                name=entry["name"], kind=entry["kind"],
                mean=float(entry.get("mean", 0.0)),
                std=float(entry.get("std", 1.0)),
                values=tuple(entry.get("values", ())),
                static=bool(entry.get("static", False))))
        return cls(features)


def _read_labels(path: str | Path) -> dict[str, int]:
    labels: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["admission_id", "label"]:
            raise DataError(f"{path}: expected header admission_id,label")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            adm, raw = row
            if raw not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
            labels[adm] = int(raw)
    return labels


def _read_events(path: str | Path, horizon: int):
    """Yields validated (admission_id, hour, feature, value) rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["admission_id", "hour", "feature", "value"]:
            raise DataError(f"{path}: expected header admission_id,hour,feature,value")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields")
            adm, hour_raw, feature, value = row
            try:
                hour = float(hour_raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: hour {hour_raw!r} is not a number")
            if not (0.0 <= hour < horizon):
                raise DataError(f"{path}:{lineno}: hour {hour} outside [0, {horizon})")
            yield lineno, adm, hour, feature, value


def fit_schema(events_path: str | Path, train_ids, horizon: int = 48,
               categorical=(), static=()) -> FeatureSchema:
    """Fit normalization statistics and categorical vocabularies.

    Statistics come from the training admissions only; categorical value
    lists are the sorted values observed there.
    """
    train = set(train_ids)
    categorical = set(categorical)
    static = set(static)
    numeric_values: dict[str, list[float]] = {}
    cat_values: dict[str, set[str]] = {}
    for lineno, adm, hour, feature, value in _read_events(events_path, horizon):
        if adm not in train:
            continue
        if feature in categorical:
            cat_values.setdefault(feature, set()).add(value)
        else:
            try:
                numeric_values.setdefault(feature, []).append(float(value))
            except ValueError:
                raise DataError(
                    f"{events_path}:{lineno}: non-numeric value {value!r} "
                    f"for numeric feature {feature!r}")
    features = []
    for name in sorted(set(numeric_values) | set(cat_values)):
        if name in cat_values:
            features.append(Feature(name, CATEGORICAL,
                                    values=tuple(sorted(cat_values[name])),
                                    static=name in static))
        else:
            vals = np.asarray(numeric_values[name])
            std = float(vals.std())
            features.append(Feature(name, NUMERIC, mean=float(vals.mean()),
                                    std=std if std > 0 else 1.0,
                                    static=name in static))
    return FeatureSchema(features)


def ingest_events(events_path: str | Path, schema: FeatureSchema | str | Path,
                  labels_path: str | Path, horizon: int = 48
                  ) -> tuple[SequenceBatch, int]:
    """Build an [n, d, T] tensor from an events file.

    Per admission and feature, observations are binned to hourly steps
    (within a bin the latest observation wins), carried forward to later
    steps, and mean-filled (normalized zero) before the first observation.
    Static features replicate their latest observation across all steps.
    Each raw feature also gets a binary mask channel marking the bins with
    a real observation. Rows naming unknown features or unseen categorical
    values are skipped and counted in the returned warning total;
    admissions with no valid observations are excluded.
    """
    if not isinstance(schema, FeatureSchema):
        schema = FeatureSchema.load(schema)
    labels = _read_labels(labels_path)
    warnings = 0
    # observations[adm][feature] = list of (hour, value)
    observations: dict[str, dict[str, list[tuple[float, str]]]] = {}
    for lineno, adm, hour, feature, value in _read_events(events_path, horizon):
        if adm not in labels:
            raise DataError(
                f"{events_path}:{lineno}: admission {adm!r} missing from labels")
        spec = schema.by_name.get(feature)
        if spec is None:
            warnings += 1
            continue
        if spec.kind == CATEGORICAL and value not in spec.values:
            warnings += 1
            continue
        if spec.kind == NUMERIC:
            try:
                float(value)
            except ValueError:
                raise DataError(
                    f"{events_path}:{lineno}: non-numeric value {value!r} "
                    f"for feature {feature!r}")
        observations.setdefault(adm, {}).setdefault(feature, []).append((hour, value))

    admissions = sorted(observations)
    T = horizon
    d = schema.value_channel_count() + len(schema.features)
    values = np.zeros((len(admissions), d, T), dtype=DTYPE)
    for i, adm in enumerate(admissions):
        col = 0
        mask_base = schema.value_channel_count()
        for f_idx, feat in enumerate(schema.features):
            obs = observations[adm].get(feat.name, [])
            # stable sort by hour: the latest observation in a bin wins
            binned: dict[int, str] = {}
            for hour, value in sorted(obs, key=lambda o: o[0]):
                binned[int(math.floor(hour))] = value
            mask_row = values[i, mask_base + f_idx]
            for t in binned:
                mask_row[t] = 1.0
            if feat.kind == NUMERIC:
                row = values[i, col]
                if feat.static and binned:
                    last = float(binned[max(binned)])
                    row[:] = (last - feat.mean) / feat.std
                else:
                    current = None  # pre-first-observation: normalized mean = 0
                    for t in range(T):
                        if t in binned:
                            current = (float(binned[t]) - feat.mean) / feat.std
                        if current is not None:
                            row[t] = current
                col += 1
            else:
                index = {v: j for j, v in enumerate(feat.values)}
                block = values[i, col:col + len(feat.values)]
                if feat.static and binned:
                    block[index[binned[max(binned)]], :] = 1.0
                else:
                    current = None
                    for t in range(T):
                        if t in binned:
                            current = index[binned[t]]
                        if current is not None:
                            block[current, t] = 1.0
                col += len(feat.values)
    batch_labels = [labels[adm] for adm in admissions]
    batch = SequenceBatch(values, batch_labels, admissions, schema.channel_names())
    return batch, warnings


# --- dataset container ------------------------------------------------------

def save_dataset(path: str | Path, batch: SequenceBatch,
                 spec: SyntheticSpec | None = None,
                 nuisance: dict[str, np.ndarray] | None = None) -> None:
    payload = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "ids": list(batch.ids),
        "labels": [int(v) for v in batch.labels],
        "channel_names": list(batch.channel_names),
        "values": encode_array(batch.values),
        "synthetic_spec": spec.to_dict() if spec is not None else None,
        "nuisance": {k: [float(x) for x in v] for k, v in nuisance.items()}
        if nuisance is not None else None,
    }
    dump_json(path, payload)


def load_dataset(path: str | Path) -> tuple[SequenceBatch, dict]:
    payload = load_json(path)
    if payload.get("format") != DATASET_FORMAT:
        raise DataError(f"{path}: not a dataset file")
    if payload.get("version") != DATASET_VERSION:
        raise DataError(f"{path}: unsupported dataset version {payload.get('version')}")
    batch = SequenceBatch(decode_array(payload["values"]), payload["labels"],
                          payload["ids"], payload["channel_names"])
    meta = {"synthetic_spec": payload.get("synthetic_spec"),
            "nuisance": {k: np.asarray(v) for k, v in payload["nuisance"].items()}
            if payload.get("nuisance") else None}
    return batch, meta
