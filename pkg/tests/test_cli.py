"""End-to-end CLI runs on a small, easily separable synthetic config."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from seqtrans.classifier import Model, save_checkpoint
from seqtrans.cli import main

EASY_SYNTHETIC = {
    "n_per_class": 60, "d": 4, "T": 16, "noise_sd": 0.1,
    "scale_range": [1.0, 1.0], "shift_range": [0.0, 0.0],
    "amplitude_range": [1.0, 1.0], "offset_range": [0.0, 0.0], "seed": 5,
}


def write_config(path: Path, **overrides) -> Path:
    config = {
        "version": 1,
        "variant": "baseline",
        "data": {"synthetic": dict(EASY_SYNTHETIC)},
        "classifier": {"channels": 8, "hidden": 16},
        "epochs": 4,
        "batch_size": 15,
        "split_seed": 1,
        "train_seed": 2,
        "bootstrap": {"resamples": 50, "level": 0.95, "seed": 3},
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return path


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGenerate:
    def test_deterministic_output_files(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(EASY_SYNTHETIC))
        for name in ("a.json", "b.json"):
            assert main(["generate", "--spec", str(spec),
                         "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_zero_examples_rejected(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(dict(EASY_SYNTHETIC, n_per_class=0)))
        assert main(["generate", "--spec", str(spec),
                     "--out", str(tmp_path / "d.json")]) == 1
        assert "n_per_class" in capsys.readouterr().err

    def test_generated_file_round_trips_through_train(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(EASY_SYNTHETIC))
        data = tmp_path / "data.json"
        assert main(["generate", "--spec", str(spec), "--out", str(data)]) == 0
        config = write_config(tmp_path / "config.json",
                              data={"dataset": str(data)}, epochs=1)
        assert main(["train", "--config", str(config),
                     "--out", str(tmp_path / "run")]) == 0
        assert (tmp_path / "run" / "metrics.csv").is_file()


class TestTrain:
    def test_baseline_reaches_high_test_auroc_on_easy_task(self, tmp_path):
        config = write_config(tmp_path / "config.json")
        out = tmp_path / "run"
        assert main(["train", "--config", str(config), "--out", str(out)]) == 0
        rows = {r["split"]: r for r in read_csv(out / "metrics.csv")}
        assert float(rows["test"]["auroc"]) >= 0.95
        assert set(rows) == {"train", "validation", "test"}
        assert (out / "checkpoint.json").is_file()
        assert (out / "manifest.json").is_file()

    def test_rerun_produces_identical_metrics(self, tmp_path):
        config = write_config(tmp_path / "config.json")
        for name in ("r1", "r2"):
            assert main(["train", "--config", str(config),
                         "--out", str(tmp_path / name)]) == 0
        assert ((tmp_path / "r1" / "metrics.csv").read_bytes()
                == (tmp_path / "r2" / "metrics.csv").read_bytes())

    @pytest.mark.parametrize("variant", ["baseline", "temporal_only",
                                         "magnitude_only", "full"])
    def test_every_variant_runs_with_one_flag_change(self, tmp_path, variant):
        config = write_config(tmp_path / "config.json", epochs=1)
        out = tmp_path / variant
        assert main(["train", "--config", str(config), "--out", str(out),
                     "--variant", variant]) == 0
        rows = read_csv(out / "metrics.csv")
        assert all(r["variant"] == variant for r in rows)

    def test_divergent_config_exits_3(self, tmp_path, capsys):
        config = write_config(tmp_path / "config.json",
                              optimizer={"lr": 1e200}, epochs=2)
        code = main(["train", "--config", str(config),
                     "--out", str(tmp_path / "run")])
        assert code == 3
        assert "non-finite" in capsys.readouterr().err

    def test_bad_config_exits_1(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"version": 1, "variant": "nope",
                                      "data": {"synthetic": EASY_SYNTHETIC}}))
        assert main(["train", "--config", str(config),
                     "--out", str(tmp_path / "run")]) == 1

    def test_missing_dataset_exits_2(self, tmp_path):
        config = write_config(tmp_path / "config.json",
                              data={"dataset": str(tmp_path / "missing.json")})
        assert main(["train", "--config", str(config),
                     "--out", str(tmp_path / "run")]) == 2

    def test_missing_required_flag_exits_1(self):
        assert main(["train"]) == 1


class TestAblation:
    def test_four_rows_consistent_with_single_train(self, tmp_path):
        config = write_config(tmp_path / "config.json", epochs=2)
        out = tmp_path / "ablation"
        assert main(["ablation", "--config", str(config), "--out", str(out)]) == 0
        rows = read_csv(out / "ablation.csv")
        assert [r["variant"] for r in rows] == ["baseline", "temporal_only",
                                                "magnitude_only", "full"]
        assert all(r["status"] == "ok" for r in rows)
        single_out = tmp_path / "single"
        assert main(["train", "--config", str(config),
                     "--out", str(single_out)]) == 0
        single = {r["split"]: r for r in read_csv(single_out / "metrics.csv")}
        baseline_row = rows[0]
        assert baseline_row["auroc"] == single["test"]["auroc"]
        assert baseline_row["aupr"] == single["test"]["aupr"]


class TestSearch:
    def test_trial_flag_controls_row_count(self, tmp_path):
        config = write_config(tmp_path / "config.json", epochs=1)
        out = tmp_path / "search"
        assert main(["search", "--config", str(config), "--out", str(out),
                     "--trials", "1"]) == 0
        rows = read_csv(out / "trials.csv")
        assert len(rows) == 1
        assert (out / "best_config.json").is_file()

    def test_best_config_retrains_to_matching_auroc(self, tmp_path):
        config = write_config(tmp_path / "config.json", epochs=2)
        out = tmp_path / "search"
        assert main(["search", "--config", str(config), "--out", str(out),
                     "--trials", "2"]) == 0
        rows = read_csv(out / "trials.csv")
        best = rows[0]
        retrain = tmp_path / "retrain"
        assert main(["train", "--config", str(out / "best_config.json"),
                     "--out", str(retrain)]) == 0
        metrics = {r["split"]: r for r in read_csv(retrain / "metrics.csv")}
        assert (abs(float(metrics["validation"]["auroc"])
                    - float(best["best_val_auroc"])) <= 0.02)


def _identity_checkpoint(tmp_path, variant="full"):
    """Untrained (identity-initialized) checkpoint plus a matching dataset."""
    from seqtrans.data import SyntheticSpec, generate_synthetic, save_dataset
    spec = SyntheticSpec.from_dict(EASY_SYNTHETIC)
    batch, nuisance = generate_synthetic(spec)
    data_path = tmp_path / "data.json"
    save_dataset(data_path, batch, spec=spec, nuisance=nuisance)
    model = Model(variant, batch.d, batch.T, seed=0)
    ckpt_path = tmp_path / f"ckpt_{variant}.json"
    experiment = {"split_seed": 1, "stratified": True,
                  "fractions": [0.70, 0.15, 0.15]}
    save_checkpoint(model, ckpt_path, experiment=experiment)
    return ckpt_path, data_path


class TestTransformDump:
    def test_identity_checkpoint_dumps_identity_rows(self, tmp_path):
        ckpt, data = _identity_checkpoint(tmp_path)
        out = tmp_path / "dump"
        assert main(["transform-dump", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(out)]) == 0
        rows = read_csv(out / "transform_params.csv")
        assert len(rows) == 18  # 15% of 120
        for row in rows:
            assert (float(row["theta1"]), float(row["theta0"]),
                    float(row["phi1"]), float(row["phi0"])) == (1, 0, 1, 0)
            assert row["split"] == "test"
        assert (out / "theta_scatter.svg").is_file()
        assert (out / "phi_scatter.svg").is_file()

    def test_example_flag_dumps_signals(self, tmp_path):
        ckpt, data = _identity_checkpoint(tmp_path)
        out = tmp_path / "dump"
        assert main(["transform-dump", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(out)]) == 0
        example_id = read_csv(out / "transform_params.csv")[0]["example_id"]
        out2 = tmp_path / "dump2"
        assert main(["transform-dump", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(out2),
                     "--example", example_id]) == 0
        signals = read_csv(out2 / "signals.csv")
        assert {r["example_id"] for r in signals} == {example_id}
        assert len(signals) == 4 * 16  # d channels x T steps
        # identity transformer: original and transformed columns agree
        assert all(r["original"] == r["transformed"] for r in signals)
        assert (out2 / f"signal_{example_id}.svg").is_file()

    def test_baseline_checkpoint_is_rejected(self, tmp_path, capsys):
        ckpt, data = _identity_checkpoint(tmp_path, variant="baseline")
        code = main(["transform-dump", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(tmp_path / "dump")])
        assert code == 1
        assert "no transformer" in capsys.readouterr().err

    def test_unknown_example_id_is_rejected(self, tmp_path):
        ckpt, data = _identity_checkpoint(tmp_path)
        assert main(["transform-dump", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(tmp_path / "dump"),
                     "--example", "nope"]) == 1


class TestDistance:
    def test_identity_transformer_gives_equal_columns(self, tmp_path):
        ckpt, data = _identity_checkpoint(tmp_path)
        out = tmp_path / "dist"
        assert main(["distance", "--checkpoint", str(ckpt),
                     "--dataset", str(data), "--out", str(out)]) == 0
        rows = read_csv(out / "distance.csv")
        assert len(rows) == 4  # 2 datasets x 2 classes
        by_key = {(r["data"], r["label"]): r for r in rows}
        for label in ("0", "1"):
            assert (by_key[("original", label)]["mean_distance"]
                    == by_key[("transformed", label)]["mean_distance"])
        assert all(r["status"] == "ok" for r in rows)
