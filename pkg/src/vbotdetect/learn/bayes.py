"""Gaussian naive Bayes with a variance floor, decided in the log domain."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import TrainingError
from .base import Dataset, Model

VAR_FLOOR = 1e-9


class NaiveBayesModel(Model):
    kind = "nb"

    def __init__(self, feature_names: list[str], classes: list[str], priors: Sequence[float],
                 means: Any, variances: Any, var_floor: float = VAR_FLOOR, scaler: dict | None = None):
        self.feature_names = feature_names
        self.classes = classes
        self.priors = np.asarray(priors, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        self.var_floor = var_floor
        self.scaler = scaler

    def log_posterior(self, X: np.ndarray) -> np.ndarray:
        """Unnormalised log P(c) + sum_i log P(x_i | c), shape (rows, classes)."""
        X = self._matrix(X)
        var = self.variances[None, :, :]
        diff = X[:, None, :] - self.means[None, :, :]
        loglik = -0.5 * (np.log(2 * np.pi * var) + diff * diff / var)
        return np.log(self.priors)[None, :] + loglik.sum(axis=2)

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.log_posterior(X), axis=1)

    def to_json(self) -> dict[str, Any]:
        return {"feature_names": self.feature_names, "classes": self.classes,
                "priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "var_floor": self.var_floor}

    @classmethod
    def from_json(cls, obj: dict[str, Any], scaler: dict | None = None) -> "NaiveBayesModel":
        return cls(obj["feature_names"], obj["classes"], obj["priors"], obj["means"],
                   obj["variances"], obj.get("var_floor", VAR_FLOOR), scaler)


def train_nb(data: Dataset, var_floor: float = VAR_FLOOR) -> NaiveBayesModel:
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    C = len(data.classes)
    counts = np.bincount(data.y, minlength=C)
    if (counts == 0).any():
        empty = [data.classes[i] for i in np.flatnonzero(counts == 0)]
        raise TrainingError(f"classes without training rows: {empty}")
    means = np.stack([data.X[data.y == c].mean(axis=0) for c in range(C)])
    variances = np.stack([data.X[data.y == c].var(axis=0) for c in range(C)])
    variances = np.maximum(variances, var_floor)
    return NaiveBayesModel(list(data.feature_names), list(data.classes), counts / counts.sum(),
                           means, variances, var_floor)


def predict_nb(model: NaiveBayesModel, row: Mapping[str, float] | Sequence[float]) -> str:
    return model.classes[int(model.predict_index(model.row_vector(row)[None, :])[0])]
