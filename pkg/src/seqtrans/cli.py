"""Command-line entry point: reproducible experiments emitting CSV + SVG.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure. Every command writes a manifest echoing the resolved config, the
package version, and checksums of its input files. All randomness is
seeded from the config, so reruns produce identical outputs.
"""

from __future__ import annotations

import csv
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .classifier import Model, VARIANTS, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_experiment_config
from .containers import dump_json, load_json, sha256_file
from .data import (SequenceBatch, SyntheticSpec, generate_synthetic,
                   ingest_events, load_dataset, save_dataset, split)
from .errors import ConfigError, DataError, NumericalError
from .metrics import compute_report, intra_class_distance
from .training import (HyperparamSpace, evaluate_probs, random_search, train)
from . import figures


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _thread_cap() -> int:
    raw = os.environ.get("SEQTRANS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SEQTRANS_THREADS must be an integer, got {raw!r}")


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def _write_manifest(out_dir: Path, command: str, config: dict,
                    inputs: list[str | Path]) -> None:
    payload = {
        "command": command,
        "package_version": __version__,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).is_file()},
    }
    dump_json(out_dir / "manifest.json", payload)


def _resolve_data(cfg: ExperimentConfig) -> tuple[SequenceBatch, dict]:
    data = cfg.data
    if "synthetic" in data:
        spec = SyntheticSpec.from_dict(data["synthetic"])
        batch, nuisance = generate_synthetic(spec)
        return batch, {"nuisance": nuisance, "inputs": []}
    if "dataset" in data:
        path = data["dataset"]
        if not Path(path).is_file():
            raise DataError(f"dataset file not found: {path}")
        batch, meta = load_dataset(path)
        return batch, {"nuisance": meta.get("nuisance"), "inputs": [path]}
    paths = [data["events"], data["schema"], data["labels"]]
    for p in paths:
        if not Path(p).is_file():
            raise DataError(f"input file not found: {p}")
    batch, warnings = ingest_events(data["events"], data["schema"], data["labels"],
                                    horizon=int(data.get("horizon", 48)))
    if warnings:
        click.echo(f"ingestion skipped {warnings} row(s) with warnings", err=True)
    return batch, {"nuisance": None, "inputs": paths}


def _metrics_rows(variant: str, named_splits, cfg: ExperimentConfig,
                  model: Model) -> list[dict]:
    rows = []
    for split_name, part in named_splits:
        scores = evaluate_probs(model, part)
        report = compute_report(scores, part.labels,
                                resamples=cfg.bootstrap_resamples,
                                level=cfg.bootstrap_level,
                                seed=cfg.bootstrap_seed)
        rows.append({
            "variant": variant, "split": split_name,
            "auroc": report.auroc, "auroc_lo": report.auroc_ci[0],
            "auroc_hi": report.auroc_ci[1],
            "aupr": report.aupr, "aupr_lo": report.aupr_ci[0],
            "aupr_hi": report.aupr_ci[1],
            "n": report.n, "prevalence": report.prevalence,
            "seed": cfg.train_seed,
        })
    return rows


METRICS_FIELDS = ["variant", "split", "auroc", "auroc_lo", "auroc_hi",
                  "aupr", "aupr_lo", "aupr_hi", "n", "prevalence", "seed"]


@click.group()
@click.version_option(__version__)
def cli():
    """Train and inspect affine sequence-transform CNN classifiers."""


@cli.command("generate")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="Synthetic spec JSON file.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output dataset file.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
def cmd_generate(spec_path, out_path, seed):
    """Generate a synthetic benchmark dataset with nuisance ground truth."""
    raw = load_json(spec_path)
    spec = SyntheticSpec.from_dict(raw)
    if seed is not None:
        raw = dict(raw)
        raw["seed"] = seed
        spec = SyntheticSpec.from_dict(raw)
    batch, nuisance = generate_synthetic(spec)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(out, batch, spec=spec, nuisance=nuisance)
    dump_json(out.with_suffix(out.suffix + ".manifest.json"), {
        "command": "generate", "package_version": __version__,
        "config": spec.to_dict(), "inputs": {str(spec_path): sha256_file(spec_path)},
    })
    click.echo(f"wrote {out} ({batch.n} examples, d={batch.d}, T={batch.T})")


def _prepare(config_path, variant, seed):
    cfg = load_experiment_config(config_path).with_overrides(variant, seed)
    batch, meta = _resolve_data(cfg)
    train_b, val_b, test_b = split(batch, cfg.fractions, seed=cfg.split_seed,
                                   stratified=cfg.stratified)
    inputs = [config_path] + meta["inputs"]
    return cfg, batch, (train_b, val_b, test_b), meta, inputs


def _fit_variant(cfg: ExperimentConfig, variant: str, splits, seed: int):
    train_b, val_b, _ = splits
    model = Model(variant, train_b.d, train_b.T,
                  classifier_config=cfg.classifier_config(variant),
                  transform_config=cfg.transform_net, seed=seed)
    report = train(model, train_b, val_b, batch_size=cfg.batch_size,
                   epochs=cfg.epochs, optimizer=cfg.optimizer, seed=seed)
    return model, report


@cli.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--variant", type=click.Choice(VARIANTS), default=None,
              help="Override the config variant.")
@click.option("--seed", type=int, default=None, help="Override the training seed.")
def cmd_train(config_path, out_dir, variant, seed):
    """Train one variant; emit checkpoint, per-epoch report, and metrics."""
    cfg, _, splits, _, inputs = _prepare(config_path, variant, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, report = _fit_variant(cfg, cfg.variant, splits, cfg.train_seed)
    save_checkpoint(model, out / "checkpoint.json", experiment=cfg.to_dict())
    _write_csv(out / "train_report.csv",
               ["epoch", "train_loss", "val_auroc", "best"],
               [{"epoch": e + 1, "train_loss": loss, "val_auroc": auc,
                 "best": int(e + 1 == report.best_epoch)}
                for e, (loss, auc) in enumerate(zip(report.train_losses,
                                                    report.val_aurocs))])
    named = list(zip(("train", "validation", "test"), splits))
    _write_csv(out / "metrics.csv", METRICS_FIELDS,
               _metrics_rows(cfg.variant, named, cfg, model))
    _write_manifest(out, "train", cfg.to_dict(), inputs)
    click.echo(f"best epoch {report.best_epoch} "
               f"(validation AUROC {report.best_val_auroc:.4f}); wrote {out}")


@cli.command("ablation")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the training seed.")
def cmd_ablation(config_path, out_dir, seed):
    """Train all four variants on shared splits; emit one comparison table."""
    cfg, _, splits, _, inputs = _prepare(config_path, None, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, _, test_b = splits

    def run(variant):
        try:
            model, _ = _fit_variant(cfg, variant, splits, cfg.train_seed)
        except NumericalError as exc:
            return {"variant": variant, "split": "test", "auroc": "", "auroc_lo": "",
                    "auroc_hi": "", "aupr": "", "aupr_lo": "", "aupr_hi": "",
                    "n": test_b.n, "prevalence": float(test_b.labels.mean()),
                    "seed": cfg.train_seed, "status": f"diverged: {exc}"}
        save_checkpoint(model, out / f"checkpoint_{variant}.json",
                        experiment=cfg.with_overrides(variant, None).to_dict())
        row = _metrics_rows(variant, [("test", test_b)], cfg, model)[0]
        row["status"] = "ok"
        return row

    workers = _thread_cap()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, VARIANTS))
    else:
        rows = [run(v) for v in VARIANTS]
    _write_csv(out / "ablation.csv", METRICS_FIELDS + ["status"], rows)
    _write_manifest(out, "ablation", cfg.to_dict(), inputs)
    click.echo(f"wrote {out / 'ablation.csv'}")


@cli.command("search")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the search master seed.")
def cmd_search(config_path, out_dir, trials, seed):
    """Random hyperparameter search; emit the ranked trial table + best config."""
    if trials < 1:
        raise ConfigError("--trials must be at least 1")
    cfg, _, splits, _, inputs = _prepare(config_path, None, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_b, val_b, _ = splits
    space = HyperparamSpace(trials=trials, max_epochs=cfg.epochs)
    rows, best = random_search(
        space, cfg.variant, train_b, val_b, master_seed=cfg.train_seed,
        base_classifier=cfg.classifier_config(cfg.variant),
        transform_config=cfg.transform_net, optimizer=cfg.optimizer,
        max_workers=_thread_cap())
    _write_csv(out / "trials.csv",
               ["trial_id", "batch_size", "dropout", "depth", "hidden_width",
                "best_val_auroc", "best_epoch", "status", "seed"], rows)
    if best is not None:
        best_cfg = cfg.to_dict()
        best_cfg["classifier"] = dict(best_cfg["classifier"],
                                      depth=best["depth"],
                                      hidden=best["hidden_width"])
        best_cfg["dropout"] = best["dropout"]
        best_cfg["batch_size"] = best["batch_size"]
        best_cfg["train_seed"] = best["seed"]
        dump_json(out / "best_config.json", best_cfg)
    _write_manifest(out, "search", cfg.to_dict(), inputs)
    click.echo(f"wrote {out / 'trials.csv'}"
               + ("" if best is None else f"; best trial {best['trial_id']}"))


def _load_model_and_test(checkpoint_path, dataset_path):
    model, experiment = load_checkpoint(checkpoint_path)
    batch, meta = load_dataset(dataset_path)
    fractions = tuple(experiment.get("fractions", (0.70, 0.15, 0.15)))
    split_seed = int(experiment.get("split_seed", 0))
    stratified = bool(experiment.get("stratified", True))
    _, _, test_b = split(batch, fractions, seed=split_seed, stratified=stratified)
    return model, test_b, meta


def _chunked_transform(model: Model, values: np.ndarray, chunk: int = 512):
    params, outputs = [], []
    for start in range(0, values.shape[0], chunk):
        xb = values[start:start + chunk]
        outputs.append(model.transformer.forward(xb, training=False))
        params.append(model.transformer.last_params)
    return np.vstack(params), np.concatenate(outputs, axis=0)


@cli.command("transform-dump")
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--example", "example_ids", multiple=True,
              help="Test-split example id to dump signals for (repeatable).")
def cmd_transform_dump(checkpoint_path, dataset_path, out_dir, example_ids):
    """Dump per-example transform parameters, scatter plots, and signals."""
    model, test_b, _ = _load_model_and_test(checkpoint_path, dataset_path)
    if model.transformer is None:
        raise ConfigError("checkpoint is a baseline model: no transformer to dump")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, transformed = _chunked_transform(model, test_b.values)
    _write_csv(out / "transform_params.csv",
               ["example_id", "theta1", "theta0", "phi1", "phi0", "split", "label"],
               [{"example_id": test_b.ids[i], "theta1": params[i, 0],
                 "theta0": params[i, 1], "phi1": params[i, 2],
                 "phi0": params[i, 3], "split": "test",
                 "label": int(test_b.labels[i])} for i in range(test_b.n)])
    figures.save_param_scatter(params[:, 0], params[:, 1], "theta1", "theta0",
                               "Temporal transform parameters (test set)",
                               out / "theta_scatter.svg")
    figures.save_param_scatter(params[:, 2], params[:, 3], "phi1", "phi0",
                               "Magnitude transform parameters (test set)",
                               out / "phi_scatter.svg")
    if example_ids:
        index = {eid: i for i, eid in enumerate(test_b.ids)}
        signal_rows = []
        for eid in example_ids:
            if eid not in index:
                raise ConfigError(f"example {eid!r} not in the test split")
            i = index[eid]
            original = test_b.values[i]
            after = transformed[i]
            for k, name in enumerate(test_b.channel_names):
                for t in range(test_b.T):
                    signal_rows.append({"example_id": eid, "channel": name,
                                        "t": t, "original": original[k, t],
                                        "transformed": after[k, t]})
            title = (f"{eid}: theta=({params[i, 0]:.2f}, {params[i, 1]:.2f}), "
                     f"phi=({params[i, 2]:.2f}, {params[i, 3]:.2f})")
            figures.save_signal_panel(original, after, test_b.channel_names,
                                      title, out / f"signal_{eid}.svg")
        _write_csv(out / "signals.csv",
                   ["example_id", "channel", "t", "original", "transformed"],
                   signal_rows)
    meta = load_json(checkpoint_path)
    _write_manifest(out, "transform-dump", meta.get("experiment", {}),
                    [checkpoint_path, dataset_path])
    click.echo(f"wrote {out / 'transform_params.csv'} ({test_b.n} rows)")


@cli.command("distance")
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_distance(checkpoint_path, dataset_path, out_dir):
    """Intra-class pairwise distances on original vs transformed test signals."""
    model, test_b, _ = _load_model_and_test(checkpoint_path, dataset_path)
    if model.transformer is None:
        raise ConfigError("checkpoint is a baseline model: no transformer to apply")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, transformed = _chunked_transform(model, test_b.values)
    rows = []
    for name, values in (("original", test_b.values), ("transformed", transformed)):
        dists = intra_class_distance(values, test_b.labels)
        for cls in (0, 1):
            n_cls = int((test_b.labels == cls).sum())
            if cls in dists:
                rows.append({"data": name, "label": cls, "n": n_cls,
                             "mean_distance": dists[cls], "status": "ok"})
            else:
                rows.append({"data": name, "label": cls, "n": n_cls,
                             "mean_distance": "", "status": "undefined"})
    _write_csv(out / "distance.csv",
               ["data", "label", "n", "mean_distance", "status"], rows)
    meta = load_json(checkpoint_path)
    _write_manifest(out, "distance", meta.get("experiment", {}),
                    [checkpoint_path, dataset_path])
    click.echo(f"wrote {out / 'distance.csv'}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
