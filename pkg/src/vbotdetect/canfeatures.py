"""Per-frame CAN feature vectors (timestamp, identifier, DLC, eight data bytes)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import capture
from .capture import CanRecord
from .errors import TraceFormatError, VbotError
from .preprocess import Preprocessed, Scaler, preprocess

CAN_FEATURE_NAMES = ("Timestamp", "CAN ID", "DLC", *(f"DATA[{i}]" for i in range(8)))
FILL_VALUE = 0  # unused data slots; DLC stays a feature so "absent" and "zero" differ


class CanRejected(VbotError):
    pass


@dataclass(frozen=True)
class CanFeatureVector:
    timestamp: float
    can_id: int
    dlc: int
    data: tuple[float, ...]  # NaN marks a byte missing inside the DLC
    label: str

    def values(self) -> list[float]:
        return [self.timestamp, float(self.can_id), float(self.dlc), *self.data]


def can_featurize(rec: CanRecord) -> CanFeatureVector:
    """Raises :class:`CanRejected` for data bytes outside [0, 255]."""
    data: list[float] = []
    for i, b in enumerate(rec.data):
        if i >= rec.dlc:
            data.append(float(FILL_VALUE))
        elif b is None:
            data.append(float("nan"))
        elif isinstance(b, int) and 0 <= b <= 255:
            data.append(float(b))
        else:
            raise CanRejected(f"data byte {i} = {b!r} outside [0, 255]")
    return CanFeatureVector(rec.timestamp, rec.can_id, rec.dlc, tuple(data), rec.label)


@dataclass
class CanFeatureTable:
    X: np.ndarray
    labels: list[str]
    rejected: int = 0
    reasons: list[str] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=lambda: list(CAN_FEATURE_NAMES))

    def __len__(self) -> int:
        return len(self.labels)


def featurize_records(records: Iterable[CanRecord]) -> CanFeatureTable:
    rows, labels, reasons = [], [], []
    for rec in records:
        try:
            v = can_featurize(rec)
        except CanRejected as exc:
            reasons.append(str(exc))
            continue
        rows.append(v.values())
        labels.append(v.label)
    X = np.array(rows, dtype=float).reshape(len(rows), len(CAN_FEATURE_NAMES))
    return CanFeatureTable(X, labels, len(reasons), reasons)


def scan_can_csv(path: str | Path, attack_label: str | None = None) -> CanFeatureTable:
    """Featurize a CAN CSV row by row; unparseable or out-of-range rows are
    counted in ``rejected`` instead of aborting the scan."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    own = bool(lines) and lines[0].startswith("#")
    if own:
        reader = csv.reader(lines[1:])
        header = next(reader, None)
        if header is None or tuple(header) != capture.CAN_COLUMNS:
            raise TraceFormatError(f"{path}: CAN column header does not match")
        first = 3
    else:
        reader = csv.reader(lines)
        first = 1
        if attack_label is None:
            attack_label = capture.attack_label_from_name(path.name)
    records: list[CanRecord] = []
    reasons: list[str] = []
    for lineno, row in enumerate(reader, start=first):
        if not row:
            continue
        try:
            if own:
                records.append(capture._parse_own_can_row(row, lineno))
            else:
                records.append(capture._parse_public_can_row(row, lineno, attack_label))
        except TraceFormatError as exc:
            reasons.append(str(exc))
    table = featurize_records(records)
    table.rejected += len(reasons)
    table.reasons = reasons + table.reasons
    return table


def _fmt(x: float) -> str:
    if np.isnan(x):
        return ""
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_can_features(table: CanFeatureTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*table.feature_names, "Label"])
        for row, label in zip(table.X.tolist(), table.labels):
            w.writerow([*(_fmt(v) for v in row), label])


def read_can_features(path: str | Path) -> CanFeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "Label":
        raise TraceFormatError(f"{path}: not a CAN feature table")
    names = rows[0][:-1]
    X = np.array([[float(c) if c != "" else np.nan for c in r[:-1]] for r in rows[1:]], dtype=float)
    return CanFeatureTable(X.reshape(len(rows) - 1, len(names)), [r[-1] for r in rows[1:]], 0, [], names)


def can_preprocess(X: np.ndarray, columns: Sequence[str] = CAN_FEATURE_NAMES, method: str = "minmax",
                   scaler: Scaler | None = None, drop_timestamp: bool = False) -> tuple[Preprocessed, list[str]]:
    """Same contract as the flow preprocessing; optionally drops the timestamp
    column (absolute time leaks the attack windows of a single capture)."""
    columns = list(columns)
    X = np.asarray(X, dtype=float)
    if drop_timestamp and "Timestamp" in columns:
        keep = [i for i, c in enumerate(columns) if c != "Timestamp"]
        X = X[:, keep]
        columns = [columns[i] for i in keep]
        if scaler is not None and "Timestamp" in scaler.columns:
            scaler = scaler.select(columns)
    return preprocess(X, columns, method, scaler), columns

