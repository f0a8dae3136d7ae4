"""Confusion counts, per-class detection metrics and stratified splitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import EmptyDatasetError


@dataclass
class ClassMetrics:
    label: str
    support: int
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    fnr: float
    flags: list[str] = field(default_factory=list)  # zero-denominator notes


@dataclass
class MetricsReport:
    classes: list[str]
    confusion: list[list[int]]  # rows = true class, columns = predicted class
    per_class: list[ClassMetrics]
    accuracy: float
    macro: dict[str, float]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(sum(map(sum, self.confusion)))

    def row(self, label: str) -> ClassMetrics:
        return self.per_class[self.classes.index(label)]

    def to_json(self) -> dict[str, Any]:
        return {
            "classes": self.classes,
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "macro": self.macro,
            "per_class": [vars(m) for m in self.per_class],
            "meta": self.meta,
        }


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def compute_metrics(predictions: Sequence[Any], labels: Sequence[Any],
                    classes: Sequence[Any] | None = None) -> MetricsReport:
    """One-vs-rest counts per class, overall accuracy and unweighted class means.

    Zero denominators give 0 and add a flag to the class row.
    """
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise EmptyDatasetError("no predictions to score")
    if classes is None:
        classes = sorted(set(labels) | set(predictions), key=str)
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    C = len(classes)
    cm = np.zeros((C, C), dtype=np.int64)
    np.add.at(cm, (np.array([index[v] for v in labels]), np.array([index[v] for v in predictions])), 1)
    n = int(cm.sum())
    rows = []
    for i, c in enumerate(classes):
        tp = int(cm[i, i])
        fn = int(cm[i].sum()) - tp
        fp = int(cm[:, i].sum()) - tp
        tn = n - tp - fn - fp
        flags = []
        precision, z = _ratio(tp, tp + fp)
        if z:
            flags.append("precision: no positive predictions")
        recall, z = _ratio(tp, tp + fn)
        if z:
            flags.append("recall: no positive rows")
        fnr, _ = _ratio(fn, tp + fn)
        fpr, z = _ratio(fp, fp + tn)
        if z:
            flags.append("fpr: no negative rows")
        # harmonic mean of precision and recall, from integer counts so it is correctly rounded
        f1, _ = _ratio(2 * tp, 2 * tp + fp + fn)
        rows.append(ClassMetrics(str(c), tp + fn, tp, fp, tn, fn, (tp + tn) / n, precision, recall,
                                 f1, fpr, fnr, flags))
    macro = {k: float(np.mean([getattr(r, k) for r in rows]))
             for k in ("accuracy", "precision", "recall", "f1", "fpr", "fnr")}
    return MetricsReport([str(c) for c in classes], cm.tolist(), rows, float(np.trace(cm)) / n, macro)


def collapse(labels: Sequence[str], benign: Sequence[str], names: tuple[str, str] = ("benign", "malicious")) -> list[str]:
    """Map a multiclass labelling onto benign / malicious."""
    b = set(benign)
    return [names[0] if v in b else names[1] for v in labels]


def split(labels: Sequence[Any], train_frac: float = 0.6, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified, seeded train/test row indices.

    The training set holds round(train_frac * N) rows; per-class quotas use
    largest remainders so every class keeps its proportion as closely as
    integer counts allow.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    labels = list(labels)
    n = len(labels)
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    classes = sorted(set(labels), key=str)
    members = {c: [i for i, v in enumerate(labels) if v == c] for c in classes}
    target = int(round(train_frac * n))
    exact = {c: train_frac * len(members[c]) for c in classes}
    quota = {c: int(np.floor(exact[c])) for c in classes}
    spare = target - sum(quota.values())
    for c in sorted(classes, key=lambda c: -(exact[c] - quota[c]))[:max(spare, 0)]:
        quota[c] += 1
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        rows = np.array(members[c])[rng.permutation(len(members[c]))]
        train.extend(rows[: quota[c]].tolist())
        test.extend(rows[quota[c]:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)
