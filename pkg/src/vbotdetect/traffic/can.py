"""Synthetic in-vehicle CAN traces: periodic ECU traffic plus injected attacks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..capture import CAN_ID_MAX, CAN_LABELS, CanRecord, TraceFile
from ..errors import ConfigError

# Identifiers commonly seen on a passenger-car powertrain bus.
DEFAULT_BENIGN_IDS = (
    0x002, 0x130, 0x131, 0x140, 0x153, 0x18F, 0x1F1, 0x260, 0x2A0, 0x2B0,
    0x316, 0x329, 0x350, 0x370, 0x430, 0x43F, 0x440, 0x4B1, 0x4F0, 0x545,
)
DOS_ID = 0x000
GEAR_ID = 0x43F
RPM_ID = 0x316
GEAR_PAYLOAD = (0x01, 0x45, 0x60, 0xFF, 0x65, 0x00, 0x00, 0x00)
RPM_PAYLOAD = (0x05, 0x20, 0xEA, 0x0A, 0x20, 0x1A, 0x00, 0x7F)
ATTACK_LABELS = CAN_LABELS[1:]


@dataclass
class CanAttackSpec:
    label: str
    start_s: float
    duration_s: float
    rate_hz: float


@dataclass
class CanScenarioConfig:
    seed: int = 0
    duration_s: float = 12.0
    benign_ids: list[int] = field(default_factory=lambda: list(DEFAULT_BENIGN_IDS))
    period_ms: tuple[float, float] = (10.0, 100.0)
    jitter_frac: float = 0.05
    attacks: list[CanAttackSpec] = field(default_factory=list)
    name: str = "custom-can"

    def validate(self) -> None:
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be positive")
        if not self.benign_ids:
            raise ConfigError("benign CAN baseline needs at least one identifier")
        lo, hi = self.period_ms
        if not 0 < lo <= hi:
            raise ConfigError("period_ms must satisfy 0 < lo <= hi")
        for i in self.benign_ids:
            if not 0 <= i <= CAN_ID_MAX:
                raise ConfigError(f"CAN ID {i:#x} does not fit in 11 bits")
        for a in self.attacks:
            if a.label not in ATTACK_LABELS:
                raise ConfigError(f"unknown CAN attack {a.label!r}")
            if a.rate_hz <= 0 or a.duration_s <= 0:
                raise ConfigError(f"{a.label}: rate and duration must be positive")

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CanScenarioConfig":
        obj = dict(obj)
        obj.pop("kind", None)
        try:
            attacks = [CanAttackSpec(**a) for a in obj.pop("attacks", [])]
            if "period_ms" in obj:
                obj["period_ms"] = tuple(obj["period_ms"])
            return cls(attacks=attacks, **obj)
        except TypeError as exc:
            raise ConfigError(f"bad CAN scenario config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "CanScenarioConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def paper_can_config(seed: int = 0) -> CanScenarioConfig:
    """One window per attack, class sizes in the proportions of the public dataset extract."""
    return CanScenarioConfig(
        seed=seed,
        name="can-attacks",
        attacks=[
            CanAttackSpec("dos", 1.0, 0.84, 1000.0),
            CanAttackSpec("fuzzy", 3.5, 1.014, 500.0),
            CanAttackSpec("gear", 6.0, 0.88, 500.0),
            CanAttackSpec("rpm", 9.0, 0.749, 1000.0),
        ],
    )


def _benign_stream(rng: np.random.Generator, can_id: int, period: float, cfg: CanScenarioConfig) -> list[CanRecord]:
    # Each ECU: fixed DLC, a few constant bytes, a rolling counter and a slow signal.
    dlc = 8 if rng.random() < 0.8 else int(rng.integers(2, 8))
    const = rng.integers(0, 256, 8)
    counter_slot = int(rng.integers(0, dlc))
    signal_slot = (counter_slot + 1) % dlc
    base = float(rng.uniform(40, 200))
    phase = rng.uniform(0, period)
    n = int(np.ceil((cfg.duration_s - phase) / period))
    times = phase + period * np.arange(n) + rng.uniform(-1, 1, n) * period * cfg.jitter_frac
    out = []
    for k, t in enumerate(times.tolist()):
        if not 0.0 <= t < cfg.duration_s:
            continue
        data = [int(b) for b in const[:dlc]]
        data[counter_slot] = k % 256
        if signal_slot != counter_slot:
            data[signal_slot] = int(np.clip(base + 30 * np.sin(t / 3.0) + rng.normal(0, 2), 0, 255))
        out.append(CanRecord(round(t, 6), can_id, dlc, tuple(data)))
    return out


def _attack_stream(rng: np.random.Generator, a: CanAttackSpec, duration: float) -> list[CanRecord]:
    n = int(np.floor(a.duration_s * a.rate_hz))
    period = 1.0 / a.rate_hz
    times = a.start_s + period * np.arange(n) + rng.uniform(0, 0.2, n) * period
    out = []
    for t in times.tolist():
        if not 0.0 <= t < duration:
            continue
        if a.label == "dos":
            rec = CanRecord(round(t, 6), DOS_ID, 8, (0,) * 8, "dos")
        elif a.label == "fuzzy":
            rec = CanRecord(round(t, 6), int(rng.integers(0, CAN_ID_MAX + 1)), 8,
                            tuple(int(b) for b in rng.integers(0, 256, 8)), "fuzzy")
        elif a.label == "gear":
            rec = CanRecord(round(t, 6), GEAR_ID, 8, GEAR_PAYLOAD, "gear")
        else:
            rec = CanRecord(round(t, 6), RPM_ID, 8, RPM_PAYLOAD, "rpm")
        out.append(rec)
    return out


def gen_can_attacks(config: CanScenarioConfig) -> TraceFile:
    """Benign periodic frames interleaved with the configured attack windows."""
    config.validate()
    records: list[CanRecord] = []
    for can_id in config.benign_ids:
        rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 1, can_id])
        period = float(rng.uniform(*config.period_ms)) / 1000.0
        records.extend(_benign_stream(rng, can_id, period, config))
    for j, a in enumerate(config.attacks):
        rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 2, j])
        records.extend(_attack_stream(rng, a, config.duration_s))
    records.sort(key=lambda r: r.timestamp)
    meta = {"scenario": config.name, "seed": config.seed, "duration_s": config.duration_s}
    return TraceFile("can", records, meta)
