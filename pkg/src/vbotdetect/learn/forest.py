"""Bagged entropy trees with per-split random feature subsets, plus plain voting."""

from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np

from ..errors import TrainingError
from .base import Dataset, Model
from .tree import TreeModel, TreeParams, train_tree


def majority_vote(predictions: Sequence[Any], classes: Sequence[Any] | None = None) -> Any:
    """Modal prediction; ties go to the class listed first in ``classes``
    (sorted order of the predicted values when not given)."""
    if len(predictions) == 0:
        raise ValueError("majority vote over no predictions")
    order = list(classes) if classes is not None else sorted(set(predictions), key=str)
    counts = {c: 0 for c in order}
    for p in predictions:
        if p not in counts:
            raise ValueError(f"prediction {p!r} is not a known class")
        counts[p] += 1
    best = max(counts.values())
    return next(c for c in order if counts[c] == best)


class ForestModel(Model):
    kind = "forest"

    def __init__(self, feature_names: list[str], classes: list[str], trees: list[TreeModel],
                 meta: dict[str, Any] | None = None, scaler: dict | None = None):
        if not trees:
            raise TrainingError("a forest needs at least one tree")
        self.feature_names = feature_names
        self.classes = classes
        self.trees = trees
        self.meta = meta or {}
        self.scaler = scaler

    def votes(self, X: np.ndarray) -> np.ndarray:
        X = self._matrix(X)
        out = np.zeros((X.shape[0], len(self.classes)), dtype=int)
        rows = np.arange(X.shape[0])
        for t in self.trees:
            np.add.at(out, (rows, t.predict_index(X)), 1)
        return out

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)  # first maximum = lowest class index

    def to_json(self) -> dict[str, Any]:
        return {"feature_names": self.feature_names, "classes": self.classes, "meta": self.meta,
                "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, obj: dict[str, Any], scaler: dict | None = None) -> "ForestModel":
        return cls(obj["feature_names"], obj["classes"], [TreeModel.from_json(t) for t in obj["trees"]],
                   obj.get("meta"), scaler)


def subset_size(d: int, feat_frac: float | None) -> int:
    if feat_frac is None:
        return max(1, int(round(math.sqrt(d))))
    if not 0 < feat_frac <= 1:
        raise TrainingError("feat_frac must lie in (0, 1]")
    return max(1, int(round(feat_frac * d)))


def train_forest(data: Dataset, n_trees: int = 25, feat_frac: float | None = None, seed: int = 0,
                 bootstrap: bool = True, params: TreeParams | None = None) -> ForestModel:
    """Each tree sees a bootstrap resample (identity when ``bootstrap`` is off)
    and a fresh random feature subset at every split (sqrt(d) by default)."""
    if n_trees < 1:
        raise TrainingError("n_trees must be at least 1")
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    base = params or TreeParams()
    d = data.X.shape[1]
    k = subset_size(d, feat_frac)
    tree_params = TreeParams(base.max_depth, base.min_samples_split, base.min_gain, k if k < d else None)
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        rows = rng.integers(0, len(data), len(data)) if bootstrap else np.arange(len(data))
        tree_seed = int(rng.integers(0, 2**31))
        trees.append(train_tree(data.subset(rows), tree_params, seed=tree_seed))
    meta = {"n_trees": n_trees, "max_features": k, "bootstrap": bootstrap, "seed": seed}
    return ForestModel(list(data.feature_names), list(data.classes), trees, meta)
