"""Analyzer and manager: classify flows and CAN frames, raise alerts, respond,
and keep the deployed models current."""

from __future__ import annotations

import json
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .canfeatures import CAN_FEATURE_NAMES, featurize_records
from .capture import TraceFile
from .errors import ConfigError, PipelineError
from .flowmeter import FEATURE_NAMES, assemble, featurize
from .learn import Dataset, majority_vote
from .learn.base import Model
from .learn.bayes import NaiveBayesModel
from .learn.forest import ForestModel
from .learn.knn import KnnModel
from .learn.tree import TreeModel
from .preprocess import Scaler

AUDIT_SCHEMA = "vbotdetect.audit/1"
POLICY_SCHEMA = "vbotdetect.policy/1"

# Response kinds
LOG_ONLY = "LogOnly"
NOTIFY_DRIVER = "NotifyDriver"
TERMINATE_SESSION = "TerminateSession"
BLOCK_DESTINATION = "BlockDestination"
REQUEST_RESET_APPROVAL = "RequestResetApproval"
IGNORE = "Ignore"

# Steps an action may carry, in execution order
STEP_ORDER = ("save_logs", "notify", "terminate_session", "block_destination", "request_reset_approval")
NETWORK_ONLY_STEPS = {"terminate_session", "block_destination"}


# --------------------------------------------------------------------------
# Policy


@dataclass
class Policy:
    benign_classes: list[str] = field(default_factory=lambda: ["benign-wsmp", "benign-ip", "benign"])
    dos_classes: list[str] = field(default_factory=lambda: ["wsmp-flood", "geo-wsmp-flood"])
    theft_classes: list[str] = field(default_factory=lambda: ["gps-tracking", "phishing"])
    # classes whose notification is delivered even while driving
    critical_classes: list[str] = field(default_factory=lambda: [
        "wsmp-flood", "geo-wsmp-flood", "dos", "fuzzy", "gear", "rpm"])
    # driver answers to "do you approve this transfer?", consumed in order
    approval_script: list[str] = field(default_factory=list)
    approval_default: str = "deny"
    motion: list[tuple[float, str]] = field(default_factory=lambda: [(0.0, "moving")])
    console_available: bool = True
    responses: dict[str, bool] = field(default_factory=lambda: dict.fromkeys(STEP_ORDER, True))
    update_window: int = 1000
    update_threshold: float = 0.95
    flow_timeout_s: float = 600.0

    def validate(self) -> None:
        for a in [*self.approval_script, self.approval_default]:
            if a not in ("approve", "deny"):
                raise ConfigError(f"approval answers are 'approve' or 'deny', got {a!r}")
        for _, state in self.motion:
            if state not in ("moving", "stopped"):
                raise ConfigError(f"motion state must be moving or stopped, got {state!r}")
        unknown = set(self.responses) - set(STEP_ORDER)
        if unknown:
            raise ConfigError(f"unknown response toggles {sorted(unknown)}")
        if self.update_window < 1 or not 0 <= self.update_threshold <= 1:
            raise ConfigError("update window must be >= 1 and threshold in [0, 1]")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Policy":
        obj = dict(obj)
        schema = obj.pop("schema", POLICY_SCHEMA)
        if schema != POLICY_SCHEMA:
            raise ConfigError(f"unrecognized policy schema {schema!r}")
        if "motion" in obj:
            obj["motion"] = [(float(t), s) for t, s in obj["motion"]]
        if "responses" in obj:
            obj["responses"] = {**dict.fromkeys(STEP_ORDER, True), **obj["responses"]}
        try:
            pol = cls(**obj)
        except TypeError as exc:
            raise ConfigError(f"bad policy: {exc}") from exc
        pol.validate()
        return pol

    @classmethod
    def load(cls, path: str | Path) -> "Policy":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict[str, Any]:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["motion"] = [list(m) for m in self.motion]
        return {"schema": POLICY_SCHEMA, **out}


# --------------------------------------------------------------------------
# Alerts and actions


@dataclass
class Alert:
    alert_id: int
    source: str  # network | in-vehicle
    verdict: str
    confidence: float
    target: str  # flow key or CAN frame description
    timestamp: float
    evidence: dict[str, float]
    destination: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"id": self.alert_id, "source": self.source, "verdict": self.verdict,
                "confidence": self.confidence, "target": self.target, "t": self.timestamp,
                "destination": self.destination, "evidence": self.evidence}


@dataclass
class ResponseAction:
    kind: str
    alert_id: int
    target: str
    steps: list[str]
    deferred: bool = False  # notification waits until the vehicle is stopped
    queued: bool = False  # console unavailable; decision pending
    note: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "alert": self.alert_id, "target": self.target, "steps": self.steps,
                "deferred": self.deferred, "queued": self.queued, "note": self.note}


class DriverConsole:
    """Scriptable stand-in for the in-vehicle driver interface."""

    def __init__(self, policy: Policy):
        self.available = policy.console_available
        self._answers = deque(policy.approval_script)
        self._default = policy.approval_default
        self.motion = "moving"
        self.pending: list[ResponseAction] = []  # decisions waiting for the console
        self.deferred: list[tuple[int, str]] = []  # (alert id, message) to show when stopped
        self.delivered: list[tuple[int, str, str]] = []  # (alert id, message, when)

    def approves_transfer(self) -> bool:
        answer = self._answers.popleft() if self._answers else self._default
        return answer == "approve"

    def notify(self, alert_id: int, message: str, critical: bool) -> bool:
        """Deliver now or defer; returns True when deferred."""
        if critical or self.motion == "stopped":
            self.delivered.append((alert_id, message, "immediate"))
            return False
        self.deferred.append((alert_id, message))
        return True

    def set_motion(self, state: str) -> list[tuple[int, str]]:
        self.motion = state
        if state != "stopped":
            return []
        out, self.deferred = self.deferred, []
        self.delivered.extend((a, m, "on-stop") for a, m in out)
        return out


def respond(alert: Alert, console: DriverConsole, policy: Policy | None = None) -> ResponseAction:
    """Choose the manager's measure for one alert.

    * flood (DoS) verdicts: save logs, notify, terminate the session, ask for
      a reset approval;
    * information theft: save logs and notify, then ask whether the transfer
      is legitimate; approved -> ignore, declined -> terminate, block the
      destination and ask for a reset approval;
    * in-vehicle verdicts: notify and ask for a reset approval.
    """
    policy = policy or Policy()
    critical = alert.verdict in policy.critical_classes
    message = f"{alert.verdict} detected ({alert.source})"

    if not console.available:
        action = ResponseAction(LOG_ONLY, alert.alert_id, alert.target, ["save_logs"], queued=True,
                                note="console unavailable; decision queued")
        console.pending.append(action)
        return _apply_toggles(action, policy)

    if alert.source == "in-vehicle":
        deferred = console.notify(alert.alert_id, message, critical=True)
        action = ResponseAction(REQUEST_RESET_APPROVAL, alert.alert_id, alert.target,
                                ["notify", "request_reset_approval"], deferred)
    elif alert.verdict in policy.dos_classes:
        deferred = console.notify(alert.alert_id, message, critical)
        action = ResponseAction(TERMINATE_SESSION, alert.alert_id, alert.target,
                                ["save_logs", "notify", "terminate_session", "request_reset_approval"], deferred)
    elif alert.verdict in policy.theft_classes:
        deferred = console.notify(alert.alert_id, message, critical)
        if console.approves_transfer():
            action = ResponseAction(IGNORE, alert.alert_id, alert.target, ["save_logs", "notify"], deferred,
                                    note="driver approved the transfer")
        else:
            action = ResponseAction(BLOCK_DESTINATION, alert.alert_id, alert.destination or alert.target,
                                    ["save_logs", "notify", "terminate_session", "block_destination",
                                     "request_reset_approval"], deferred, note="driver declined the transfer")
    else:
        deferred = console.notify(alert.alert_id, message, critical)
        action = ResponseAction(NOTIFY_DRIVER, alert.alert_id, alert.target, ["save_logs", "notify"], deferred,
                                note="verdict outside the configured response classes")
    return _apply_toggles(action, policy)


def _apply_toggles(action: ResponseAction, policy: Policy) -> ResponseAction:
    steps = [s for s in action.steps if policy.responses.get(s, True)]
    # a reset request is never sent without telling the driver why
    if "request_reset_approval" in steps and "notify" not in steps:
        steps.insert(steps.index("request_reset_approval"), "notify")
    action.steps = steps
    return action


# --------------------------------------------------------------------------
# Classification


def _scaled(model: Model, X: np.ndarray, names: Sequence[str]) -> np.ndarray:
    missing = [n for n in model.feature_names if n not in names]
    if missing:
        raise PipelineError(f"model expects features the collector does not produce: {missing[:5]}")
    idx = [list(names).index(n) for n in model.feature_names]
    X = X[:, idx]
    if model.scaler:
        X = Scaler.from_json(model.scaler).select(model.feature_names).transform(X)
    return X


def classify(model: Model, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and a confidence in (0, 1] for each row."""
    if len(X) == 0:
        return np.empty(0, dtype=int), np.empty(0)
    if isinstance(model, TreeModel):
        dist = model.predict_proba(X)
    elif isinstance(model, ForestModel):
        votes = model.votes(X)
        dist = votes / votes.sum(axis=1, keepdims=True)
    elif isinstance(model, NaiveBayesModel):
        lp = model.log_posterior(X)
        lp -= lp.max(axis=1, keepdims=True)
        dist = np.exp(lp)
        dist /= dist.sum(axis=1, keepdims=True)
    elif isinstance(model, KnnModel):
        s = model.scores(X)
        dist = s / s.sum(axis=1, keepdims=True)
    else:
        idx = model.predict_index(X)
        return idx, np.ones(len(idx))
    idx = np.argmax(dist, axis=1)
    return idx, dist[np.arange(len(idx)), idx]


@dataclass
class _Event:
    t: float
    order: int
    source: str
    verdict: str
    confidence: float
    target: str
    destination: str
    evidence: dict[str, float]


def _network_events(trace: TraceFile, model: Model, timeout_s: float) -> list[_Event]:
    flows = assemble(trace, timeout_s)
    feats = [featurize(f) for f in flows]
    X = np.array([[v[n] for n in FEATURE_NAMES] for v in feats], dtype=float).reshape(len(flows), len(FEATURE_NAMES))
    Xs = _scaled(model, X, FEATURE_NAMES)
    idx, conf = classify(model, Xs)
    events = []
    for k, (f, i, c) in enumerate(zip(flows, idx.tolist(), conf.tolist())):
        evidence = {n: feats[k][n] for n in model.feature_names}
        events.append(_Event(f.last_us / 1e6, k, "network", model.classes[i], c, str(f.key), f.dst, evidence))
    return events


def _can_events(trace: TraceFile, model: Model) -> list[_Event]:
    table = featurize_records(trace.records)
    Xs = _scaled(model, table.X, CAN_FEATURE_NAMES)
    idx, conf = classify(model, Xs)
    events = []
    for k, (row, i, c) in enumerate(zip(table.X.tolist(), idx.tolist(), conf.tolist())):
        target = f"can:{int(row[1]):03x}@{row[0]:.6f}"
        evidence = {n: row[CAN_FEATURE_NAMES.index(n)] for n in model.feature_names}
        events.append(_Event(row[0], k, "in-vehicle", model.classes[i], c, target, "", evidence))
    return events


# --------------------------------------------------------------------------
# Audit log


class AuditLog:
    """Append-only JSON-lines log without wall-clock content, so reruns match byte for byte."""

    def __init__(self, header: dict[str, Any] | None = None):
        self._lock = threading.Lock()
        self.lines: list[str] = []
        self._seq = 0
        self._emit({"schema": AUDIT_SCHEMA, **(header or {})})

    def _emit(self, obj: dict[str, Any]) -> None:
        self.lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))

    def append(self, event: str, at: float, **fields: Any) -> None:
        fields.pop("t", None)
        with self._lock:
            self._emit({"seq": self._seq, "event": event, "t": round(at, 6), **fields})
            self._seq += 1

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.text(), encoding="utf-8")


@dataclass
class PipelineResult:
    alerts: list[Alert]
    actions: list[ResponseAction]
    audit: AuditLog
    classified: dict[str, int]
    console: DriverConsole


def run_pipeline(trace: TraceFile | None, net_model: Model | None, can_model: Model | None,
                 policy: Policy | None = None, can_trace: TraceFile | None = None) -> PipelineResult:
    """Classify every closed flow and CAN frame once, alert on malicious
    verdicts and let the manager respond, in time order."""
    policy = policy or Policy()
    policy.validate()
    if trace is not None and trace.kind == "can" and can_trace is None:
        trace, can_trace = None, trace
    if trace is not None and net_model is None:
        raise PipelineError("a network trace needs a network model")
    if can_trace is not None and can_model is None:
        raise PipelineError("a CAN trace needs an in-vehicle model")

    # one classification worker per traffic source
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_net = pool.submit(_network_events, trace, net_model, policy.flow_timeout_s) if trace else None
        fut_can = pool.submit(_can_events, can_trace, can_model) if can_trace else None
        net_events = fut_net.result() if fut_net else []
        can_events = fut_can.result() if fut_can else []

    header = {"policy": policy.to_json(),
              "network_trace": trace.meta if trace else None,
              "can_trace": can_trace.meta if can_trace else None}
    audit = AuditLog(header)
    console = DriverConsole(policy)
    motion = sorted(policy.motion)
    alerts: list[Alert] = []
    actions: list[ResponseAction] = []
    source_rank = {"network": 0, "in-vehicle": 1}
    events = sorted(net_events + can_events, key=lambda e: (e.t, source_rank[e.source], e.order))
    m = 0

    def advance_motion(until: float) -> None:
        nonlocal m
        while m < len(motion) and motion[m][0] <= until:
            t, state = motion[m]
            audit.append("motion", t, state=state)
            for alert_id, msg in console.set_motion(state):
                audit.append("notify", t, alert=alert_id, message=msg, delivery="on-stop")
            m += 1

    benign = set(policy.benign_classes)
    for ev in events:
        advance_motion(ev.t)
        if ev.verdict in benign:
            continue
        alert = Alert(len(alerts), ev.source, ev.verdict, ev.confidence, ev.target, ev.t, ev.evidence,
                      ev.destination)
        alerts.append(alert)
        audit.append("alert", ev.t, **alert.to_json())
        action = respond(alert, console, policy)
        actions.append(action)
        audit.append("action", ev.t, **action.to_json())
    advance_motion(float("inf"))
    classified = {"network": len(net_events), "in-vehicle": len(can_events)}
    audit.append("summary", events[-1].t if events else 0.0, alerts=len(alerts), classified=classified,
                 pending=len(console.pending), undelivered=len(console.deferred))
    return PipelineResult(alerts, actions, audit, classified, console)


# --------------------------------------------------------------------------
# Model updates


class ModelRegistry:
    """Holds the deployed model; readers always see one whole (model, version) pair."""

    def __init__(self, model: Model, version: int = 1):
        self._lock = threading.Lock()
        self._current = (model, version)

    def get(self) -> tuple[Model, int]:
        with self._lock:
            return self._current

    def swap(self, model: Model) -> int:
        with self._lock:
            version = self._current[1] + 1
            self._current = (model, version)
            return version

    def predict(self, X: np.ndarray) -> tuple[list[str], int]:
        model, version = self.get()
        return model.predict_labels(X), version


class EnsembleLabeler:
    """Labels fresh traffic by majority vote of several trained models."""

    def __init__(self, models: Sequence[Model]):
        if len(models) < 3:
            raise ConfigError("the labelling ensemble needs at least three models")
        self.models = list(models)
        self.classes = list(models[0].classes)

    def __call__(self, X: np.ndarray) -> list[str]:
        per_model = [m.predict_labels(X) for m in self.models]
        return [majority_vote([p[i] for p in per_model], self.classes) for i in range(len(X))]


class RetrainServer:
    """In-process stand-in for the remote training service."""

    def __init__(self, trainer: Callable[[Dataset], Model]):
        self.trainer = trainer
        self.calls = 0

    def retrain(self, data: Dataset) -> Model:
        self.calls += 1
        return self.trainer(data)


@dataclass
class Feedback:
    x: Sequence[float]
    truth: str | None = None  # known label, when feedback is available


class UpdateMonitor:
    """Sliding window of correct/incorrect outcomes; retrain when the window is
    full and its accuracy falls below the threshold."""

    def __init__(self, window: int = 1000, threshold: float = 0.95):
        if window < 1:
            raise ConfigError("window must be at least 1")
        self.window: deque[bool] = deque(maxlen=window)
        self.threshold = threshold
        self.state = "idle"  # idle | collecting | retraining
        self.collected: list[Sequence[float]] = []

    def observe(self, x: Sequence[float], predicted: str, truth: str | None) -> None:
        self.collected.append(x)
        if truth is not None:
            self.window.append(predicted == truth)
        self.state = "collecting"

    def accuracy(self) -> float:
        return sum(self.window) / len(self.window) if self.window else 1.0

    def should_retrain(self) -> bool:
        return len(self.window) == self.window.maxlen and self.accuracy() < self.threshold

    def reset(self) -> None:
        self.window.clear()
        self.collected = []
        self.state = "idle"


@dataclass
class UpdateResult:
    version: int
    retrains: int
    failures: int
    merged_rows: list[int]
    log: list[dict[str, Any]]


def monitor_and_update(monitor: UpdateMonitor, feedback: Iterable[Feedback], labeler: Callable[[np.ndarray], list[str]],
                       retrainer: RetrainServer | Callable[[Dataset], Model], registry: ModelRegistry,
                       training_data: Dataset) -> UpdateResult:
    """Feed predictions and feedback through the monitor; on degradation, label
    the collected traffic by ensemble vote, merge it with the previous training
    data, retrain and swap the model in."""
    retrain = retrainer.retrain if isinstance(retrainer, RetrainServer) else retrainer
    data = training_data
    retrains = failures = 0
    merged_rows: list[int] = []
    log: list[dict[str, Any]] = []
    for i, fb in enumerate(feedback):
        labels, version = registry.predict(np.asarray(fb.x, dtype=float)[None, :])
        monitor.observe(fb.x, labels[0], fb.truth)
        if not monitor.should_retrain():
            continue
        monitor.state = "retraining"
        acc = monitor.accuracy()
        X_new = np.asarray(monitor.collected, dtype=float)
        try:
            new_labels = labeler(X_new)
            fresh = Dataset.from_labels(X_new, new_labels, data.feature_names, data.classes)
            merged = Dataset(np.vstack([data.X, fresh.X]), np.concatenate([data.y, fresh.y]),
                             data.feature_names, data.classes)
            model = retrain(merged)
        except Exception as exc:  # keep serving the previous model
            failures += 1
            log.append({"at": i, "event": "retrain-failed", "accuracy": acc, "error": str(exc)})
            monitor.reset()
            continue
        model.scaler = registry.get()[0].scaler
        version = registry.swap(model)
        data = merged
        retrains += 1
        merged_rows.append(len(merged))
        log.append({"at": i, "event": "retrained", "accuracy": acc, "rows": len(merged), "version": version})
        monitor.reset()
    return UpdateResult(registry.get()[1], retrains, failures, merged_rows, log)
