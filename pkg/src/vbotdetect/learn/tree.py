"""Entropy-driven binary decision trees over numeric features.

Splits are ``x[f] < threshold`` (left) versus ``>=`` (right), with thresholds
at midpoints between consecutive distinct values.  The split maximising
information gain wins; ties go to the lower feature index, then the lower
threshold.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InferenceError, TrainingError
from .base import Dataset, Model, entropy_rows


@dataclass
class TreeParams:
    max_depth: int = 32
    min_samples_split: int = 2
    # 0 lets the tree split through zero-gain levels (XOR-like data) until pure
    min_gain: float = 1e-9
    max_features: int | None = None  # random subset size per split (forest use)

    def check(self) -> None:
        if self.max_depth < 0 or self.min_samples_split < 2 or self.min_gain < 0:
            raise TrainingError(f"invalid tree parameters {self}")


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features: Sequence[int]) -> _Split | None:
    """Highest-gain threshold split over ``features`` (None if no value changes)."""
    n = len(y)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    total = onehot.sum(axis=0)
    parent = entropy_rows(total[None, :])[0]
    best: _Split | None = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        distinct = xs[1:] > xs[:-1]
        if not distinct.any():
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1][distinct]
        n_left = np.arange(1, n)[distinct].astype(float)
        right = total - left
        n_right = n - n_left
        child = (n_left * entropy_rows(left) + n_right * entropy_rows(right)) / n
        gains = parent - child
        k = int(np.argmax(gains))
        gain = max(float(gains[k]), 0.0)
        if best is None or gain > best.gain:
            lo, hi = xs[:-1][distinct][k], xs[1:][distinct][k]
            mid = (lo + hi) / 2.0
            if not lo < mid <= hi:  # adjacent floats
                mid = hi
            best = _Split(gain, int(f), float(mid))
    return best


class TreeModel(Model):
    kind = "tree"

    def __init__(self, feature_names: list[str], classes: list[str], feature: list[int],
                 threshold: list[float], left: list[int], right: list[int], dist: list[list[float]],
                 meta: dict[str, Any] | None = None, scaler: dict | None = None):
        self.feature_names = feature_names
        self.classes = classes
        self.feature = np.asarray(feature, dtype=int)  # -1 marks a leaf
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.dist = np.asarray(dist, dtype=float).reshape(len(feature), len(classes))
        self.meta = meta or {}
        self.scaler = scaler

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_count(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        depths = [0] * self.node_count
        for i in range(self.node_count):  # children always follow their parent
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return max(depths)

    def leaves(self, X: np.ndarray) -> np.ndarray:
        X = self._matrix(X)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            vals = X[rows, np.where(inner, f, 0)]
            go_left = vals < self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.dist[self.leaves(X)]

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def referenced_features(self) -> list[str]:
        return sorted({self.feature_names[f] for f in self.feature if f >= 0})

    def to_json(self) -> dict[str, Any]:
        return {
            "feature_names": self.feature_names,
            "classes": self.classes,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "dist": self.dist.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any], scaler: dict | None = None) -> "TreeModel":
        return cls(obj["feature_names"], obj["classes"], obj["feature"], obj["threshold"],
                   obj["left"], obj["right"], obj["dist"], obj.get("meta"), scaler)


def _grow(data: Dataset, params: TreeParams, rng: np.random.Generator | None) -> TreeModel:
    X, y = data.X, data.y
    C = len(data.classes)
    d = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    dist: list[list[float]] = []

    def new_node(rows: np.ndarray) -> int:
        counts = np.bincount(y[rows], minlength=C).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        dist.append((counts / counts.sum()).tolist())
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        counts = np.bincount(y[rows], minlength=C)
        if (counts > 0).sum() <= 1 or depth >= params.max_depth or len(rows) < params.min_samples_split:
            continue
        if params.max_features is not None and params.max_features < d:
            feats = np.sort(rng.choice(d, params.max_features, replace=False))
        else:
            feats = np.arange(d)
        split = best_split(X[rows], y[rows], C, feats)
        if split is None or split.gain < params.min_gain:
            continue
        mask = X[rows, split.feature] < split.threshold
        lrows, rrows = rows[mask], rows[~mask]
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # push right first so the left subtree is numbered first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return TreeModel(list(data.feature_names), list(data.classes), feature, threshold, left, right, dist)


def train_tree(data: Dataset, params: TreeParams | None = None, seed: int = 0) -> TreeModel:
    """Grow an entropy tree until leaves are pure or a limit applies."""
    params = params or TreeParams()
    params.check()
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if not np.isfinite(data.X).all():
        raise TrainingError("feature matrix contains NaN or infinite values")
    rng = np.random.default_rng(seed) if params.max_features is not None else None
    model = _grow(data, params, rng)
    model.meta = {"depth": model.depth(), "leaves": model.leaf_count, "seed": seed,
                  "params": asdict(params), "rows": len(data)}
    return model


def predict(model: TreeModel, row: Mapping[str, float] | Sequence[float]) -> tuple[str, dict[str, float]]:
    """Classify one row; returns the class and the leaf's class distribution."""
    if isinstance(row, Mapping):
        missing = [n for n in model.referenced_features() if n not in row]
        if missing:
            raise InferenceError(f"row lacks features used by the tree: {missing}")
        vec = np.array([float(row.get(n, math.nan)) for n in model.feature_names])
    else:
        vec = np.asarray(row, dtype=float)
    dist = model.predict_proba(vec[None, :])[0]
    k = int(np.argmax(dist))
    return model.classes[k], dict(zip(model.classes, dist.tolist()))
