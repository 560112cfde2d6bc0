"""Learned affine temporal and magnitude transforms for 1D CNN classifiers."""

__version__ = "0.1.0"

from .classifier import (BASELINE, VARIANTS, ClassifierConfig, Model,
                         load_checkpoint, save_checkpoint)
from .data import (SequenceBatch, SyntheticSpec, generate_synthetic,
                   ingest_events, load_dataset, save_dataset, split)
from .metrics import auroc, aupr, bootstrap_ci, compute_report, intra_class_distance
from .training import (Adam, HyperparamSpace, OptimizerSettings, TrainReport,
                       random_search, train)
from .transform import (FULL, MAGNITUDE_ONLY, MODES, TEMPORAL_ONLY,
                        SequenceTransformer, TransformNetConfig, leaky_clamp,
                        make_grid)

__all__ = [
    "__version__",
    "BASELINE", "VARIANTS", "ClassifierConfig", "Model",
    "load_checkpoint", "save_checkpoint",
    "SequenceBatch", "SyntheticSpec", "generate_synthetic", "ingest_events",
    "load_dataset", "save_dataset", "split",
    "auroc", "aupr", "bootstrap_ci", "compute_report", "intra_class_distance",
    "Adam", "HyperparamSpace", "OptimizerSettings", "TrainReport",
    "random_search", "train",
    "FULL", "MAGNITUDE_ONLY", "MODES", "TEMPORAL_ONLY",
    "SequenceTransformer", "TransformNetConfig", "leaky_clamp", "make_grid",
]
