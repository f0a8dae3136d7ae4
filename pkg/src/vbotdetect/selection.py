"""Greedy forward feature selection wrapped around cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SelectionError
from .learn.base import Dataset
from .learn.cv import Scorer, Trainer, accuracy_scorer, kfold_cv


@dataclass
class SelectionResult:
    selected: list[int]
    names: list[str]
    score: float
    history: list[tuple[str, float]] = field(default_factory=list)  # accepted feature, CV score


def _columns(data: Dataset, cols: list[int]) -> Dataset:
    return Dataset(data.X[:, cols], data.y, [data.feature_names[c] for c in cols], data.classes)


def select_forward(data: Dataset, trainer: Trainer, scorer: Scorer = accuracy_scorer, k: int = 10,
                   seed: int = 0, max_features: int | None = None) -> SelectionResult:
    """Start empty; each round add the feature whose inclusion gives the best
    cross-validated score, as long as that score strictly beats the current
    one.  Equal scores go to the lower column index."""
    d = data.X.shape[1]
    if d < 2:
        raise SelectionError("forward selection needs at least two features")
    if len(np.unique(data.y)) < 2:
        raise SelectionError("forward selection needs at least two classes")
    selected: list[int] = []
    current = -np.inf
    history: list[tuple[str, float]] = []
    limit = d if max_features is None else min(d, max_features)
    while len(selected) < limit:
        best_f, best_score = -1, -np.inf
        for f in range(d):
            if f in selected:
                continue
            score = kfold_cv(_columns(data, selected + [f]), trainer, k, scorer, seed).mean
            if score > best_score:
                best_f, best_score = f, score
        if best_score <= current:
            break
        selected.append(best_f)
        current = best_score
        history.append((data.feature_names[best_f], best_score))
    return SelectionResult(selected, [data.feature_names[c] for c in selected], float(current), history)
