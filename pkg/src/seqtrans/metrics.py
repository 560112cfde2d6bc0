"""Ranking metrics, bootstrap confidence intervals, and pairwise distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import NumericalError, UndefinedMetricError


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise UndefinedMetricError("scores and labels must be 1D arrays of equal length")
    if not np.all((labels == 0) | (labels == 1)):
        raise UndefinedMetricError("labels must be binary (0/1)")
    return scores, labels.astype(np.intp)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(np.diff(sorted_scores) != 0)
    starts = np.r_[0, boundaries + 1]
    ends = np.r_[boundaries, scores.size - 1]
    group_rank = (starts + ends) / 2.0 + 1.0
    group_of = np.zeros(scores.size, dtype=np.intp)
    group_of[starts] = 1
    group_of = np.cumsum(group_of) - 1
    ranks = np.empty(scores.size)
    ranks[order] = group_rank[group_of]
    return ranks


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(positive outscores negative), ties count 1/2."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auroc needs at least one positive and one negative")
    ranks = _average_ranks(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def aupr(scores, labels) -> float:
    """Average precision over a descending-score sweep, tie groups handled jointly."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("aupr needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    y = labels[order]
    s = scores[order]
    # keep the last index of each tied-score group
    group_ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[group_ends].astype(np.float64)
    predicted = group_ends + 1.0
    precision = tp / predicted
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def bootstrap_ci(metric, scores, labels, resamples: int = 1000,
                 level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for ``metric(scores, labels)``.

    Each of the ``resamples`` draws uses its own generator spawned from the
    master seed, so results do not depend on evaluation order. Resamples on
    which the metric is undefined (e.g. a single-class draw) are redrawn.
    """
    scores, labels = _validate(scores, labels)
    metric(scores, labels)  # must be defined on the full sample
    n = scores.size
    children = np.random.SeedSequence(seed).spawn(resamples)
    values = np.empty(resamples)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        for _ in range(10000):
            idx = rng.integers(0, n, size=n)
            try:
                values[i] = metric(scores[idx], labels[idx])
                break
            except UndefinedMetricError:
                continue
        else:
            raise NumericalError("bootstrap could not draw a defined resample")
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(values, [100 * alpha, 100 * (1 - alpha)])
    return float(low), float(high)


@dataclass
class MetricsReport:
    auroc: float
    aupr: float
    auroc_ci: tuple[float, float]
    aupr_ci: tuple[float, float]
    n: int
    prevalence: float
    resamples: int
    seed: int


def compute_report(scores, labels, resamples: int = 1000, level: float = 0.95,
                   seed: int = 0) -> MetricsReport:
    scores, labels = _validate(scores, labels)
    return MetricsReport(
        auroc=auroc(scores, labels),
        aupr=aupr(scores, labels),
        auroc_ci=bootstrap_ci(auroc, scores, labels, resamples, level, seed),
        aupr_ci=bootstrap_ci(aupr, scores, labels, resamples, level, seed),
        n=int(labels.size),
        prevalence=float(labels.mean()),
        resamples=resamples,
        seed=seed,
    )


def intra_class_distance(values: np.ndarray, labels) -> dict[int, float]:
    """Mean pairwise Euclidean distance between flattened same-class examples.

    Returns {class label: mean distance} for each class with at least two
    members; classes with fewer members are omitted.
    """
    labels = np.asarray(labels)
    flat = np.asarray(values, dtype=np.float64).reshape(len(labels), -1)
    out: dict[int, float] = {}
    for cls in np.unique(labels):
        members = flat[labels == cls]
        if members.shape[0] < 2:
            continue
        out[int(cls)] = float(pdist(members).mean())
    return out
