"""Seeded stratified k-fold cross-validation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import TrainingError
from .base import Dataset, Model

Trainer = Callable[[Dataset], Model]
Scorer = Callable[[Model, Dataset], float]


def accuracy_scorer(model: Model, data: Dataset) -> float:
    return float((model.predict_index(data.X) == data.y).mean())


class StratificationWarning(UserWarning):
    pass


def kfold_indices(y: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """Test-index sets of ``k`` disjoint folds covering every row."""
    n = len(y)
    if not 2 <= k <= n:
        raise TrainingError(f"k={k} must lie in [2, {n}]")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    counts = np.bincount(y)
    if (counts[counts > 0] < k).any():
        warnings.warn(f"a class has fewer than {k} rows; using unstratified folds", StratificationWarning,
                      stacklevel=3)
        order = rng.permutation(n)
        return [np.sort(part) for part in np.array_split(order, k)]
    offset = 0
    for c in np.flatnonzero(counts):
        rows = rng.permutation(np.flatnonzero(y == c))
        for j, r in enumerate(rows):
            buckets[(offset + j) % k].append(int(r))
        offset = (offset + len(rows)) % k
    return [np.array(sorted(b), dtype=int) for b in buckets]


@dataclass
class CVResult:
    scores: list[float]
    folds: list[np.ndarray] = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))


def kfold_cv(data: Dataset, trainer: Trainer, k: int = 10, scorer: Scorer = accuracy_scorer,
             seed: int = 0) -> CVResult:
    folds = kfold_indices(data.y, k, seed)
    all_rows = np.arange(len(data))
    scores = []
    for test in folds:
        train = np.setdiff1d(all_rows, test, assume_unique=True)
        model = trainer(data.subset(train))
        scores.append(float(scorer(model, data.subset(test))))
    return CVResult(scores, folds)
