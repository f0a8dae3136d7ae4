"""k-nearest neighbours with similarity-weighted class scores.

score(c) = sum over the K nearest rows j of Sim(x, x_j) * [y_j = c],
Sim = 1 / (1 + euclidean distance).  Equidistant rows are taken in row
order; equal scores resolve to the lower class index.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InferenceError, TrainingError
from .base import Dataset, Model

_CHUNK = 64


class KnnModel(Model):
    kind = "knn"

    def __init__(self, feature_names: list[str], classes: list[str], X: Any, y: Any, k: int = 5,
                 scaler: dict | None = None):
        self.feature_names = feature_names
        self.classes = classes
        self.X = np.asarray(X, dtype=float).reshape(-1, len(feature_names))
        self.y = np.asarray(y, dtype=int)
        self.k = int(k)
        self.scaler = scaler

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = self._matrix(X)
        if len(self.y) == 0:
            raise InferenceError("kNN model holds no training rows")
        C = len(self.classes)
        out = np.zeros((X.shape[0], C))
        for start in range(0, X.shape[0], _CHUNK):
            q = X[start:start + _CHUNK]
            diff = q[:, None, :] - self.X[None, :, :]  # direct form keeps exact ties exact
            dist = np.sqrt((diff * diff).sum(axis=2))
            order = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
            near = np.take_along_axis(dist, order, axis=1)
            sim = 1.0 / (1.0 + near)
            labels = self.y[order]
            block = out[start:start + _CHUNK]
            for c in range(C):
                block[:, c] = (sim * (labels == c)).sum(axis=1)
        return out

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)

    def to_json(self) -> dict[str, Any]:
        return {"feature_names": self.feature_names, "classes": self.classes, "k": self.k,
                "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any], scaler: dict | None = None) -> "KnnModel":
        return cls(obj["feature_names"], obj["classes"], obj["X"], obj["y"], obj["k"], scaler)


def train_knn(data: Dataset, k: int = 5) -> KnnModel:
    if k < 1:
        raise TrainingError("K must be at least 1")
    if k > len(data):
        raise TrainingError(f"K={k} exceeds the {len(data)} training rows")
    return KnnModel(list(data.feature_names), list(data.classes), data.X.copy(), data.y.copy(), k)


def predict_knn(model: KnnModel, row: Mapping[str, float] | Sequence[float]) -> str:
    return model.classes[int(model.predict_index(model.row_vector(row)[None, :])[0])]
