"""Staged experiments: generate, meter, preprocess, split, train, test, report."""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .canfeatures import CAN_FEATURE_NAMES, can_preprocess, featurize_records, scan_can_csv
from .errors import ConfigError, StageError
from .flowmeter import FlowTable, assemble, flows_to_table
from .learn import Dataset, kfold_cv, make_trainer
from .learn.base import Model
from .metrics import MetricsReport, collapse, compute_metrics, split
from .preprocess import preprocess
from .selection import select_forward
from .traffic import PAPER_NETWORK_SCENARIOS, gen_can_attacks, generate, get_scenario, paper_can_config
from .traffic.network import BENIGN_CLASSES, NETWORK_CLASSES

# Row labels used in the published result tables.
DISPLAY_NAMES = {
    "benign-wsmp": "WSMP Traffic",
    "benign-ip": "IP Traffic",
    "gps-tracking": "GPS Tracking",
    "phishing": "Phishing",
    "wsmp-flood": "WSMP Flood",
    "geo-wsmp-flood": "GeoFlood",
    "benign": "Benign",
    "malicious": "Malicious",
    "dos": "DoS Attack",
    "fuzzy": "Fuzzy Attack",
    "gear": "Gear Attack",
    "rpm": "RPM Attack",
}
CAN_CLASSES = ("benign", "dos", "fuzzy", "gear", "rpm")


@dataclass
class ExperimentConfig:
    name: str
    kind: str  # network | can
    seed: int = 0
    model: str = "tree"
    model_params: dict[str, Any] = field(default_factory=dict)
    train_frac: float = 0.6
    cv_folds: int = 10
    scaling: str = "minmax"
    select_features: bool = False
    scenarios: list[str] = field(default_factory=lambda: list(PAPER_NETWORK_SCENARIOS))
    timeout_s: float = 600.0
    can_csv: list[str] = field(default_factory=list)  # public car-hacking files, optional
    drop_timestamp: bool = False
    thresholds: dict[str, float] = field(default_factory=dict)


def bundled_experiment(name: str, seed: int = 0) -> ExperimentConfig:
    if name == "paper-network":
        return ExperimentConfig(name=name, kind="network", seed=seed,
                                thresholds={"accuracy_min": 0.97, "macro_fpr_max": 0.01})
    if name == "paper-can":
        return ExperimentConfig(name=name, kind="can", seed=seed, thresholds={"accuracy_min": 0.99})
    raise ConfigError(f"unknown experiment {name!r} (bundled: paper-network, paper-can)")


def scenario_seed(seed: int, name: str) -> int:
    """Distinct, reproducible seed per scenario of one experiment."""
    return (seed * 1_000_003 + zlib.crc32(name.encode())) & 0x7FFFFFFF


@dataclass
class SchemeResult:
    scheme: str  # multiclass | binary | collapsed
    report: MetricsReport
    train_counts: dict[str, int]
    test_counts: dict[str, int]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    feature_names: list[str]
    selected: list[str] | None
    cv: dict[str, Any]
    schemes: dict[str, SchemeResult]
    model: Model
    binary_model: Model
    rows: int
    rejected: int = 0

    @property
    def multiclass(self) -> MetricsReport:
        return self.schemes["multiclass"].report

    @property
    def binary(self) -> MetricsReport:
        return self.schemes["binary"].report

    def malicious_recall(self, scheme: str) -> float:
        """Binary: recall of the malicious class.  Multiclass: unweighted mean
        recall over the attack classes."""
        if scheme == "binary":
            return self.binary.row("malicious").recall
        rep = self.multiclass
        benign = _benign_set(self.config.kind)
        vals = [m.recall for m in rep.per_class if m.label not in benign]
        return float(np.mean(vals))

    def check(self) -> list[tuple[str, bool, str]]:
        out = []
        t = self.config.thresholds
        if "accuracy_min" in t:
            acc = self.multiclass.accuracy
            out.append(("accuracy", acc >= t["accuracy_min"], f"{acc:.6f} >= {t['accuracy_min']}"))
        if "macro_fpr_max" in t:
            fpr = self.multiclass.macro["fpr"]
            out.append(("macro FPR", fpr <= t["macro_fpr_max"], f"{fpr:.6f} <= {t['macro_fpr_max']}"))
        return out


def _benign_set(kind: str) -> set[str]:
    return set(BENIGN_CLASSES) if kind == "network" else {"benign"}


def _stage(name: str, fn: Callable[[], Any]) -> Any:
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:  # tag and re-raise; the original is chained
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------------
# Data collection


def collect_network(cfg: ExperimentConfig) -> FlowTable:
    tables = []
    for name in cfg.scenarios:
        sc = _stage("gen", lambda: get_scenario(name, scenario_seed(cfg.seed, name)))
        trace = _stage("gen", lambda: generate(sc))
        flows = _stage("meter", lambda: assemble(trace, cfg.timeout_s))
        tables.append(_stage("meter", lambda: flows_to_table(flows)))
    names = tables[0].feature_names
    return FlowTable(names, np.vstack([t.X for t in tables]), sum((t.labels for t in tables), []),
                     sum((t.ids for t in tables), []))


def collect_can(cfg: ExperimentConfig) -> tuple[np.ndarray, list[str], int]:
    if cfg.can_csv:
        X_parts, labels, rejected = [], [], 0
        for path in cfg.can_csv:
            tab = _stage("canscan", lambda: scan_can_csv(path))
            X_parts.append(tab.X)
            labels += tab.labels
            rejected += tab.rejected
        return np.vstack(X_parts), labels, rejected
    trace = _stage("gen", lambda: gen_can_attacks(paper_can_config(cfg.seed)))
    tab = _stage("canscan", lambda: featurize_records(trace.records))
    return tab.X, tab.labels, tab.rejected


# --------------------------------------------------------------------------
# Running


def _counts(labels: list[str], classes: list[str]) -> dict[str, int]:
    return {c: labels.count(c) for c in classes}


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    if cfg.kind == "network":
        table = collect_network(cfg)
        X, labels, names, rejected = table.X, table.labels, table.feature_names, 0
        classes = [c for c in NETWORK_CLASSES if c in set(labels)]
        pre = _stage("preprocess", lambda: preprocess(X, names, cfg.scaling))
    elif cfg.kind == "can":
        X, labels, rejected = collect_can(cfg)
        classes = [c for c in CAN_CLASSES if c in set(labels)]
        pre, names = _stage("preprocess", lambda: can_preprocess(X, CAN_FEATURE_NAMES, cfg.scaling,
                                                                  drop_timestamp=cfg.drop_timestamp))
    else:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    labels = [labels[i] for i in pre.kept]
    data = Dataset.from_labels(pre.X, labels, names, classes)
    train_idx, test_idx = _stage("split", lambda: split(labels, cfg.train_frac, cfg.seed))
    train, test = data.subset(train_idx), data.subset(test_idx)

    trainer = make_trainer(cfg.model, seed=cfg.seed, **cfg.model_params)
    selected = None
    if cfg.select_features:
        sel = _stage("select", lambda: select_forward(train, trainer, k=cfg.cv_folds, seed=cfg.seed))
        selected = sel.names
        cols = sel.selected
        train = Dataset(train.X[:, cols], train.y, selected, classes)
        test = Dataset(test.X[:, cols], test.y, selected, classes)

    cv = _stage("train", lambda: kfold_cv(train, trainer, cfg.cv_folds, seed=cfg.seed))
    model = _stage("train", lambda: trainer(train))
    model.scaler = pre.scaler.select(train.feature_names).to_json()
    pred = [classes[i] for i in model.predict_index(test.X)]
    truth = test.labels()
    multi = compute_metrics(pred, truth, classes)

    benign = _benign_set(cfg.kind)
    bin_classes = ["benign", "malicious"]
    bin_train = Dataset.from_labels(train.X, collapse(train.labels(), benign), train.feature_names, bin_classes)
    bin_model = _stage("train", lambda: trainer(bin_train))
    bin_pred = [bin_classes[i] for i in bin_model.predict_index(test.X)]
    bin_truth = collapse(truth, benign)
    binary = compute_metrics(bin_pred, bin_truth, bin_classes)
    collapsed = compute_metrics(collapse(pred, benign), bin_truth, bin_classes)

    meta = {"experiment": cfg.name, "seed": cfg.seed, "model": cfg.model, "train_frac": cfg.train_frac,
            "features": len(train.feature_names)}
    for rep in (multi, binary, collapsed):
        rep.meta = dict(meta)
    tr_labels = [labels[i] for i in train_idx]
    te_labels = [labels[i] for i in test_idx]
    schemes = {
        "multiclass": SchemeResult("multiclass", multi, _counts(tr_labels, classes), _counts(te_labels, classes)),
        "binary": SchemeResult("binary", binary, _counts(collapse(tr_labels, benign), bin_classes),
                               _counts(bin_truth, bin_classes)),
        "collapsed": SchemeResult("collapsed", collapsed, {}, _counts(bin_truth, bin_classes)),
    }
    result = ExperimentResult(cfg, list(train.feature_names), selected,
                              {"k": cfg.cv_folds, "scores": cv.scores, "mean": cv.mean, "std": cv.std},
                              schemes, model, bin_model, len(labels), rejected)
    if out_dir is not None:
        _stage("report", lambda: write_reports(result, out_dir))
    return result


# --------------------------------------------------------------------------
# Reports


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


def _display(label: str) -> str:
    return DISPLAY_NAMES.get(label, label)


def metrics_table_md(rep: MetricsReport, title: str) -> str:
    lines = [f"### {title}", "", "| Class | Support | Accuracy | Precision | Recall | F1 | FPR | FNR |",
             "|---|---:|---:|---:|---:|---:|---:|---:|"]
    for m in rep.per_class:
        lines.append(f"| {_display(m.label)} | {m.support} | {_pct(m.accuracy)} | {_pct(m.precision)} | "
                     f"{_pct(m.recall)} | {_pct(m.f1)} | {_pct(m.fpr)} | {_pct(m.fnr)} |")
    mac = rep.macro
    lines.append(f"| Average Value | {rep.n} | {_pct(mac['accuracy'])} | {_pct(mac['precision'])} | "
                 f"{_pct(mac['recall'])} | {_pct(mac['f1'])} | {_pct(mac['fpr'])} | {_pct(mac['fnr'])} |")
    lines += ["", f"Overall accuracy: {rep.accuracy!r}", ""]
    return "\n".join(lines)


def distribution_md(s: SchemeResult, title: str) -> str:
    lines = [f"### {title}", "", "| Class | Train | Test | Total |", "|---|---:|---:|---:|"]
    for c, te in s.test_counts.items():
        tr = s.train_counts.get(c, 0)
        lines.append(f"| {_display(c)} | {tr} | {te} | {tr + te} |")
    lines.append("")
    return "\n".join(lines)


def metrics_csv(rep: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "support", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1", "fpr", "fnr"])
    for m in rep.per_class:
        w.writerow([m.label, m.support, m.tp, m.fp, m.tn, m.fn, repr(m.accuracy), repr(m.precision),
                    repr(m.recall), repr(m.f1), repr(m.fpr), repr(m.fnr)])
    mac = rep.macro
    w.writerow(["macro", rep.n, "", "", "", "", *(repr(mac[k]) for k in
                                                  ("accuracy", "precision", "recall", "f1", "fpr", "fnr"))])
    return buf.getvalue()


def confusion_csv(rep: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true \\ predicted", *rep.classes])
    for c, row in zip(rep.classes, rep.confusion):
        w.writerow([c, *row])
    return buf.getvalue()


def render_markdown(res: ExperimentResult) -> str:
    cfg = res.config
    parts = [f"# Experiment `{cfg.name}` (seed {cfg.seed})", "",
             f"Model: {cfg.model}; split {cfg.train_frac:.0%} train / {1 - cfg.train_frac:.0%} test; "
             f"{res.rows} rows; {len(res.feature_names)} features.", ""]
    if res.rejected:
        parts += [f"Rejected input rows: {res.rejected}", ""]
    if res.selected is not None:
        parts += ["Forward-selected features: " + ", ".join(res.selected), ""]
    parts += [f"{res.cv['k']}-fold CV accuracy on the training part: mean {res.cv['mean']!r}, "
              f"std {res.cv['std']!r}", ""]
    parts.append(distribution_md(res.schemes["multiclass"], "Class distribution"))
    parts.append(metrics_table_md(res.binary, "Binary scheme (benign / malicious)"))
    parts.append(metrics_table_md(res.multiclass, "Multiclass scheme"))
    parts.append(metrics_table_md(res.schemes["collapsed"].report,
                                  "Multiclass predictions collapsed to benign / malicious"))
    parts += [f"Malicious recall, binary model: {res.malicious_recall('binary')!r}",
              f"Mean attack-class recall, multiclass model: {res.malicious_recall('multiclass')!r}", ""]
    return "\n".join(parts)


def write_reports(res: ExperimentResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(render_markdown(res), encoding="utf-8")
    for key, s in res.schemes.items():
        (out / f"metrics_{key}.csv").write_text(metrics_csv(s.report), encoding="utf-8")
        (out / f"confusion_{key}.csv").write_text(confusion_csv(s.report), encoding="utf-8")
    summary = {
        "config": asdict(res.config),
        "rows": res.rows,
        "rejected": res.rejected,
        "features": res.feature_names,
        "selected": res.selected,
        "cv": res.cv,
        "schemes": {k: s.report.to_json() for k, s in res.schemes.items()},
        "malicious_recall": {"binary": res.malicious_recall("binary"),
                             "multiclass_mean": res.malicious_recall("multiclass")},
        "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in res.check()],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
