"""Adam optimizer, training loop with validation selection, random search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierConfig, Model, default_dropout
from .data import SequenceBatch
from .errors import TrainingDiverged
from .metrics import auroc
from .nn import bce_loss
from .transform import TransformNetConfig


@dataclass
class OptimizerSettings:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    """Adam over a model's LayerParams; reads the accumulated gradients."""

    def __init__(self, model: Model, settings: OptimizerSettings | None = None):
        self.settings = settings or OptimizerSettings()
        self._slots = []
        for _, p in model.parameters():
            for value, grad in ((p.weights, p.grad_weights), (p.bias, p.grad_bias)):
                self._slots.append((value, grad, np.zeros_like(value),
                                    np.zeros_like(value)))
        self.t = 0

    def step(self) -> None:
        s = self.settings
        self.t += 1
        bc1 = 1.0 - s.beta1 ** self.t
        bc2 = 1.0 - s.beta2 ** self.t
        for value, grad, m, v in self._slots:
            m *= s.beta1
            m += (1.0 - s.beta1) * grad
            v *= s.beta2
            v += (1.0 - s.beta2) * (grad * grad)
            value -= s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)


@dataclass
class TrainReport:
    train_losses: list[float]
    val_aurocs: list[float]
    best_epoch: int  # 1-based; ties resolve to the earliest epoch
    best_val_auroc: float
    wall_clock: float
    seed: int
    param_excursion: float  # max |emitted transform parameter| seen while training
    best_snapshot: dict = field(repr=False, default_factory=dict)


def evaluate_probs(model: Model, batch: SequenceBatch, chunk: int = 512) -> np.ndarray:
    """Eval-mode probabilities, chunked to bound memory."""
    outs = []
    for start in range(0, batch.n, chunk):
        outs.append(model.forward(batch.values[start:start + chunk], training=False))
    return np.concatenate(outs)


def train(model: Model, train_batch: SequenceBatch, val_batch: SequenceBatch,
          batch_size: int = 15, epochs: int = 10,
          optimizer: OptimizerSettings | None = None, seed: int = 0) -> TrainReport:
    """Mini-batch BCE training with per-epoch validation AUROC selection.

    Deterministic given the seed: shuffling and dropout draw from one
    generator. The model is left at its best-epoch parameters. A non-finite
    loss aborts with :class:`TrainingDiverged`.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    adam = Adam(model, optimizer)
    report = TrainReport([], [], 0, -np.inf, 0.0, seed, 0.0)
    excursion = 0.0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(train_batch.n)
        losses = []
        for start in range(0, train_batch.n, batch_size):
            idx = order[start:start + batch_size]
            xb = train_batch.values[idx]
            yb = train_batch.labels[idx]
            model.zero_grads()
            probs = model.forward(xb, training=True, rng=rng)
            loss, grad = bce_loss(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {start // batch_size}")
            if model.transformer is not None:
                excursion = max(excursion, float(
                    np.abs(model.transformer.last_params).max()))
            model.backward(grad)
            adam.step()
            losses.append(loss)
        report.train_losses.append(float(np.mean(losses)))
        val_probs = evaluate_probs(model, val_batch)
        val_auroc = auroc(val_probs, val_batch.labels)
        report.val_aurocs.append(float(val_auroc))
        if val_auroc > report.best_val_auroc:
            report.best_val_auroc = float(val_auroc)
            report.best_epoch = epoch
            report.best_snapshot = model.snapshot()
    model.restore(report.best_snapshot)
    report.param_excursion = excursion
    report.wall_clock = time.perf_counter() - started
    return report


@dataclass
class HyperparamSpace:
    batch_sizes: tuple[int, ...] = (8, 15, 30)
    dropouts: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    depths: tuple[int, ...] = (2, 3, 4)
    hidden_widths: tuple[int, ...] = (50, 100, 250, 500)
    trials: int = 20
    max_epochs: int = 10


def sample_trial(space: HyperparamSpace, rng: np.random.Generator) -> dict:
    """One independent uniform draw per hyperparameter dimension."""
    return {
        "batch_size": int(rng.choice(space.batch_sizes)),
        "dropout": float(rng.choice(space.dropouts)),
        "depth": int(rng.choice(space.depths)),
        "hidden_width": int(rng.choice(space.hidden_widths)),
    }


def run_trial(trial_id: int, space: HyperparamSpace, variant: str,
              train_batch: SequenceBatch, val_batch: SequenceBatch,
              master_seed: int, base_classifier: ClassifierConfig,
              transform_config: TransformNetConfig,
              optimizer: OptimizerSettings) -> dict:
    """Train one sampled configuration; self-contained and order-independent."""
    seed = master_seed + trial_id
    config = sample_trial(space, np.random.default_rng(seed))
    row = {"trial_id": trial_id, "seed": seed, **config,
           "best_val_auroc": float("nan"), "best_epoch": 0, "status": "ok"}
    clf = ClassifierConfig(depth=config["depth"], channels=base_classifier.channels,
                           filter_size=base_classifier.filter_size,
                           pool=base_classifier.pool, hidden=config["hidden_width"],
                           dropout=config["dropout"])
    try:
        model = Model(variant, train_batch.d, train_batch.T,
                      classifier_config=clf, transform_config=transform_config,
                      seed=seed)
        report = train(model, train_batch, val_batch,
                       batch_size=config["batch_size"], epochs=space.max_epochs,
                       optimizer=optimizer, seed=seed)
        row["best_val_auroc"] = report.best_val_auroc
        row["best_epoch"] = report.best_epoch
    except TrainingDiverged as exc:
        row["status"] = f"diverged: {exc}"
    return row


def random_search(space: HyperparamSpace, variant: str,
                  train_batch: SequenceBatch, val_batch: SequenceBatch,
                  master_seed: int = 0,
                  base_classifier: ClassifierConfig | None = None,
                  transform_config: TransformNetConfig | None = None,
                  optimizer: OptimizerSettings | None = None,
                  max_workers: int = 1) -> tuple[list[dict], dict | None]:
    """Random hyperparameter search; returns (ranked rows, best row).

    Trial ``i`` seeds everything from ``master_seed + i``, so the sampled
    configurations and results are reproducible and independent of
    execution order. Diverged trials are recorded and skipped for ranking.
    """
    base_classifier = base_classifier or ClassifierConfig(
        dropout=default_dropout(variant))
    transform_config = transform_config or TransformNetConfig()
    optimizer = optimizer or OptimizerSettings()

    def run(i):
        return run_trial(i, space, variant, train_batch, val_batch, master_seed,
                         base_classifier, transform_config, optimizer)

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(run, range(space.trials)))
    else:
        rows = [run(i) for i in range(space.trials)]
    rows.sort(key=lambda r: (r["status"] != "ok",
                             -(r["best_val_auroc"] if r["status"] == "ok" else 0.0),
                             r["trial_id"]))
    best = rows[0] if rows and rows[0]["status"] == "ok" else None
    return rows, best
