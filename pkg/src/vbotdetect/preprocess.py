"""Row cleaning and column scaling with a persisted fit."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, EmptyDatasetError

SCALER_SCHEMA = "vbotdetect.scaler/1"
METHODS = ("minmax", "zscore")


@dataclass
class Scaler:
    """Per-column affine map ``(x - offset) / span``; zero span maps to 0."""

    method: str
    columns: list[str]
    offset: list[float] = field(default_factory=list)
    span: list[float] = field(default_factory=list)

    @classmethod
    def fit(cls, X: np.ndarray, columns: Sequence[str], method: str = "minmax") -> "Scaler":
        if method not in METHODS:
            raise ConfigError(f"unknown scaling method {method!r}")
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            raise EmptyDatasetError("cannot fit a scaler on zero rows")
        if method == "minmax":
            lo = X.min(axis=0)
            span = X.max(axis=0) - lo
        else:
            lo = X.mean(axis=0)
            span = X.std(axis=0)
        return cls(method, list(columns), lo.tolist(), span.tolist())

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != len(self.columns):
            raise ConfigError(f"scaler fitted on {len(self.columns)} columns, got {X.shape[1]}")
        offset = np.asarray(self.offset)
        span = np.asarray(self.span)
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - offset) / safe, 0.0)

    def select(self, names: Sequence[str]) -> "Scaler":
        idx = [self.columns.index(n) for n in names]
        return Scaler(self.method, list(names), [self.offset[i] for i in idx], [self.span[i] for i in idx])

    def to_json(self) -> dict[str, Any]:
        return {"schema": SCALER_SCHEMA, "method": self.method, "columns": self.columns,
                "offset": self.offset, "span": self.span}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Scaler":
        if obj.get("schema") != SCALER_SCHEMA:
            raise ConfigError(f"unrecognized scaler schema {obj.get('schema')!r}")
        return cls(obj["method"], list(obj["columns"]), list(obj["offset"]), list(obj["span"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Scaler":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def dropna(X: np.ndarray) -> np.ndarray:
    """Indices of rows without any NaN or infinite value."""
    X = np.asarray(X, dtype=float)
    return np.flatnonzero(np.isfinite(X).all(axis=1))


@dataclass
class Preprocessed:
    X: np.ndarray
    kept: np.ndarray  # row indices of the input that survived cleaning
    scaler: Scaler


def preprocess(X: np.ndarray, columns: Sequence[str], method: str = "minmax",
               scaler: Scaler | None = None) -> Preprocessed:
    """Drop incomplete rows, then scale.  Pass ``scaler`` to apply an existing fit."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("no rows to preprocess")
    kept = dropna(X)
    if kept.size == 0:
        raise EmptyDatasetError("every row has a missing value")
    clean = X[kept]
    if scaler is None:
        scaler = Scaler.fit(clean, columns, method)
    return Preprocessed(scaler.transform(clean), kept, scaler)
