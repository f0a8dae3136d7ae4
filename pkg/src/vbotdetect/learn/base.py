"""Dataset container, entropy and the shared model interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InferenceError, TrainingError


def entropy(class_counts: Sequence[float]) -> float:
    """Shannon entropy in bits of a class-count vector, with 0*log(0) = 0."""
    c = np.asarray(class_counts, dtype=float)
    if c.ndim != 1 or (c < 0).any():
        raise ValueError("class counts must be a non-negative vector")
    total = c.sum()
    if total <= 0:
        raise ValueError("entropy of an empty collection is undefined")
    p = c[c > 0] / total
    return float(-(p * np.log2(p)).sum())


def entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a (m, C) count matrix; rows must have positive sums."""
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / totals
    logs = np.log2(np.where(p > 0, p, 1.0))
    return -(p * logs).sum(axis=1)


@dataclass
class Dataset:
    X: np.ndarray  # (rows, features), float
    y: np.ndarray  # class indices into ``classes``
    feature_names: list[str]
    classes: list[str]

    @classmethod
    def from_labels(cls, X: Any, labels: Sequence[Any], feature_names: Sequence[str] | None = None,
                    classes: Sequence[Any] | None = None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise TrainingError("feature matrix must be two-dimensional")
        if X.shape[0] != len(labels):
            raise TrainingError(f"{X.shape[0]} rows but {len(labels)} labels")
        if X.shape[1] < 1:
            raise TrainingError("need at least one feature")
        if classes is None:
            classes = sorted(set(labels), key=str)
        classes = [str(c) for c in classes]
        index = {c: i for i, c in enumerate(classes)}
        try:
            y = np.array([index[str(v)] for v in labels], dtype=int)
        except KeyError as exc:
            raise TrainingError(f"label {exc.args[0]!r} not among classes {classes}") from None
        names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise TrainingError("feature name count does not match the matrix")
        return cls(X, y, names, classes)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.X[rows], self.y[rows], self.feature_names, self.classes)

    def labels(self) -> list[str]:
        return [self.classes[i] for i in self.y]


class Model:
    """Common inference surface: matrices in, class indices out."""

    kind = "model"
    feature_names: list[str]
    classes: list[str]
    scaler: dict | None = None

    def predict_index(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_labels(self, X: np.ndarray) -> list[str]:
        return [self.classes[i] for i in self.predict_index(self._matrix(X))]

    def _matrix(self, X: Any) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise InferenceError(f"model expects {len(self.feature_names)} features, got {X.shape[1]}")
        return X

    def row_vector(self, row: Mapping[str, float] | Sequence[float]) -> np.ndarray:
        """Accept a name->value mapping or a positional vector."""
        if isinstance(row, Mapping):
            missing = [n for n in self.feature_names if n not in row]
            if missing:
                raise InferenceError(f"row lacks model features {missing[:5]}")
            return np.array([float(row[n]) for n in self.feature_names])
        return self._matrix(row)[0]
