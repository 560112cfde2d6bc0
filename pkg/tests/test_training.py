"""Optimizer behavior, training loop contracts, random search."""

import numpy as np
import pytest

from seqtrans.classifier import BASELINE, ClassifierConfig, Model
from seqtrans.data import SequenceBatch
from seqtrans.errors import TrainingDiverged
from seqtrans.metrics import auroc
from seqtrans.nn import bce_loss
from seqtrans.training import (Adam, HyperparamSpace, OptimizerSettings,
                               evaluate_probs, random_search, sample_trial,
                               train)
from seqtrans.transform import FULL


def toy_batch(n=200, d=2, T=8, shift=1.0, seed=0):
    """Linearly separable classes: class 1 is mean-shifted upward."""
    rng = np.random.default_rng(seed)
    labels = np.tile([0, 1], n // 2)
    values = rng.normal(size=(n, d, T)) * 0.5
    values[labels == 1] += shift
    return SequenceBatch(values, labels, [f"t{i}" for i in range(n)],
                         [f"c{k}" for k in range(d)])


def small_model(variant=BASELINE, seed=0, d=2, T=8):
    return Model(variant, d, T, seed=seed,
                 classifier_config=ClassifierConfig(channels=8, hidden=16,
                                                    dropout=0.1))


class TestAdam:
    def test_single_step_decreases_loss_at_small_lr(self):
        batch = toy_batch(n=40)
        model = small_model(seed=1)
        adam = Adam(model, OptimizerSettings(lr=1e-4))
        rng = np.random.default_rng(3)
        model.zero_grads()
        probs = model.forward(batch.values, training=True,
                              rng=np.random.default_rng(9))
        before, grad = bce_loss(probs, batch.labels)
        model.backward(grad)
        adam.step()
        probs = model.forward(batch.values, training=True,
                              rng=np.random.default_rng(9))
        after, _ = bce_loss(probs, batch.labels)
        assert after < before

    def test_zero_learning_rate_leaves_parameters_unchanged(self):
        batch = toy_batch(n=40)
        model = small_model(seed=2)
        before = model.snapshot()
        report = train(model, batch, batch, batch_size=20, epochs=2,
                       optimizer=OptimizerSettings(lr=0.0), seed=4)
        for name, p in model.parameters():
            w, b = before[name]
            assert np.array_equal(p.weights, w)
            assert np.array_equal(p.bias, b)
        assert len(set(report.val_aurocs)) == 1
        assert report.best_epoch == 1  # ties resolve to the earliest epoch


class TestTrain:
    def test_separable_toy_task_reaches_high_training_auroc(self):
        batch = toy_batch(n=200, d=2, T=8)
        model = small_model(seed=5)
        train(model, batch, batch, batch_size=15, epochs=10, seed=5)
        scores = evaluate_probs(model, batch)
        assert auroc(scores, batch.labels) >= 0.99

    def test_same_seed_reproduces_loss_sequence(self):
        batch = toy_batch(n=60)
        r1 = train(small_model(seed=6), batch, batch, batch_size=10, epochs=3, seed=7)
        r2 = train(small_model(seed=6), batch, batch, batch_size=10, epochs=3, seed=7)
        assert r1.train_losses == r2.train_losses
        assert r1.val_aurocs == r2.val_aurocs

    def test_model_is_left_at_best_epoch(self):
        batch = toy_batch(n=80)
        model = small_model(seed=8)
        report = train(model, batch, batch, batch_size=10, epochs=5, seed=8)
        scores = evaluate_probs(model, batch)
        assert auroc(scores, batch.labels) == pytest.approx(report.best_val_auroc)

    def test_divergence_raises_training_diverged(self):
        batch = toy_batch(n=40)
        model = small_model(seed=9)
        with pytest.raises(TrainingDiverged):
            train(model, batch, batch, batch_size=10, epochs=3,
                  optimizer=OptimizerSettings(lr=1e200), seed=9)

    def test_transform_params_move_only_in_transformer_variants(self):
        batch = toy_batch(n=60, T=16)
        model = Model(FULL, 2, 16, seed=10,
                      classifier_config=ClassifierConfig(channels=8, hidden=16,
                                                         dropout=0.0))
        before = {n: p.weights.copy() for n, p in model.parameters()
                  if n.startswith("transform_net.")}
        train(model, batch, batch, batch_size=20, epochs=2, seed=10)
        moved = any(not np.array_equal(before[n], p.weights)
                    for n, p in model.parameters()
                    if n.startswith("transform_net."))
        assert moved


class TestRandomSearch:
    def test_single_trial_table(self):
        batch = toy_batch(n=60, T=16)
        space = HyperparamSpace(trials=1, max_epochs=2)
        rows, best = random_search(space, BASELINE, batch, batch, master_seed=1)
        assert len(rows) == 1
        assert best == rows[0]

    def test_sampled_values_come_from_defining_sets(self):
        space = HyperparamSpace()
        rng = np.random.default_rng(0)
        for _ in range(200):
            config = sample_trial(space, rng)
            assert config["batch_size"] in space.batch_sizes
            assert config["dropout"] in space.dropouts
            assert config["depth"] in space.depths
            assert config["hidden_width"] in space.hidden_widths

    def test_sampled_configs_reproducible_from_master_seed(self):
        space = HyperparamSpace(trials=20)
        draws = [sample_trial(space, np.random.default_rng(100 + i))
                 for i in range(space.trials)]
        again = [sample_trial(space, np.random.default_rng(100 + i))
                 for i in range(space.trials)]
        assert draws == again

    def test_trial_table_independent_of_worker_count(self):
        batch = toy_batch(n=60, T=16)
        space = HyperparamSpace(trials=3, max_epochs=2)
        serial, _ = random_search(space, BASELINE, batch, batch, master_seed=2,
                                  max_workers=1)
        threaded, _ = random_search(space, BASELINE, batch, batch, master_seed=2,
                                    max_workers=2)
        assert serial == threaded

    def test_diverged_trial_recorded_and_search_continues(self):
        # an absurd learning rate overflows at least one trial to NaN; the
        # others may merely saturate, but every trial must land in the table
        batch = toy_batch(n=40, T=16)
        space = HyperparamSpace(trials=2, max_epochs=2)
        rows, _ = random_search(space, BASELINE, batch, batch, master_seed=3,
                                optimizer=OptimizerSettings(lr=1e200))
        assert len(rows) == 2
        assert any(r["status"].startswith("diverged") for r in rows)
        diverged = [r for r in rows if r["status"] != "ok"]
        assert all(np.isnan(r["best_val_auroc"]) for r in diverged)
