"""Scenario configuration and the bundled named scenarios."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from .apps import get_profile

ATTACK_KINDS = ("wsmp-flood", "geo-wsmp-flood", "gps-tracking", "audio-exfil")

# Victims and botmaster used by the published experiment.
PAPER_DDOS_VICTIMS = (0, 6, 10)
PAPER_BOTMASTER = 20
PAPER_THEFT_VICTIMS = (7, 8, 9)


@dataclass
class AppSpec:
    app_id: str
    nodes: list[int] | None = None  # None: every vehicle participates
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class AttackSpec:
    kind: str
    attackers: list[int] = field(default_factory=list)
    victims: list[int] = field(default_factory=list)
    botmaster: int | None = None
    rate: float = 1000.0  # flood frames per second per attacker
    start_s: float = 0.0
    attack_duration_s: float | None = None  # None: until end of run
    stagger_s: float = 0.0  # attacker i starts at start_s + i * stagger_s
    area_tag: str | None = None
    area_nodes: list[int] | None = None
    neighbor_map: dict[int, list[int]] | None = None
    flood_payload: tuple[int, int] = (40, 160)
    # theft of information
    jitter_s: float = 0.0
    reports_per_session: int | None = None  # GPS socket re-opened after N reports
    period_s: tuple[float, float] = (10.0, 20.0)
    burst_bytes: int = 32 * 1024
    mss: int = 1400
    segment_gap_s: float = 0.002


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration_s: float = 500.0
    node_count: int = 40
    app_mix: list[AppSpec] = field(default_factory=list)
    attack: AttackSpec | None = None
    rsu_count: int = 4
    server_count: int = 2
    name: str = "custom"

    def validate(self) -> None:
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be positive")
        if self.node_count < 2:
            raise ConfigError("node_count must be at least 2")
        for spec in self.app_mix:
            get_profile(spec.app_id)
            if spec.nodes is not None:
                self._check_nodes(spec.nodes, f"app {spec.app_id}")
        a = self.attack
        if a is None:
            return
        if a.kind not in ATTACK_KINDS:
            raise ConfigError(f"unknown attack kind {a.kind!r}")
        self._check_nodes(a.attackers, "attackers")
        self._check_nodes(a.victims, "victims")
        if a.botmaster is not None:
            self._check_nodes([a.botmaster], "botmaster")
        attackers = set(a.attackers) | ({a.botmaster} if a.botmaster is not None else set())
        if attackers & set(a.victims):
            raise ConfigError("attacker and victim sets must be disjoint")

    def _check_nodes(self, nodes: list[int], what: str) -> None:
        for n in nodes:
            if not 0 <= n < self.node_count:
                raise ConfigError(f"{what}: node {n} outside [0, {self.node_count})")

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ScenarioConfig":
        obj = dict(obj)
        try:
            apps = [AppSpec(**a) for a in obj.pop("app_mix", [])]
            attack = obj.pop("attack", None)
            if attack is not None:
                attack = dict(attack)
                if attack.get("neighbor_map") is not None:
                    attack["neighbor_map"] = {int(k): list(v) for k, v in attack["neighbor_map"].items()}
                for key in ("flood_payload", "period_s"):
                    if key in attack:
                        attack[key] = tuple(attack[key])
                attack = AttackSpec(**attack)
            return cls(app_mix=apps, attack=attack, **obj)
        except TypeError as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _apps(*ids: str, nodes: list[int] | None = None) -> list[AppSpec]:
    return [AppSpec(a, nodes) for a in ids]


_BACKGROUND_NODES = list(range(0, 40, 4))


def _benign(name: str, apps: list[AppSpec]) -> ScenarioConfig:
    return ScenarioConfig(name=name, app_mix=apps)


def _ddos_attackers() -> list[int]:
    return [n for n in range(40) if n not in PAPER_DDOS_VICTIMS]


def bundled_scenarios() -> dict[str, ScenarioConfig]:
    """The six benign and four attack scenario groups, at 40 nodes / 500 s."""
    victims = list(PAPER_DDOS_VICTIMS)
    background = _apps("BSM", nodes=_BACKGROUND_NODES)
    scenarios = [
        _benign("benign-beacon", _apps("BSM", "CCW", "CVW")),
        _benign("benign-safety-event", _apps("EEBL", "PCN", "RFN", "RHCN", "SVA")),
        _benign("benign-convenience-event", _apps("CRN", "TOLL", "TP")),
        _benign("benign-convenience-ondemand", _apps("PAN", "PSL")),
        _benign("benign-commercial-content", _apps("CMDD", "RTVR")),
        _benign("benign-commercial-service", _apps("RVP/D", "SA")),
        ScenarioConfig(
            name="attack-wsmp-flood",
            app_mix=background,
            attack=AttackSpec(
                kind="wsmp-flood", attackers=_ddos_attackers(), victims=victims,
                start_s=20.0, attack_duration_s=1.0, stagger_s=12.0,
            ),
        ),
        ScenarioConfig(
            name="attack-geo-wsmp-flood",
            app_mix=background,
            attack=AttackSpec(
                kind="geo-wsmp-flood", attackers=_ddos_attackers(), victims=victims,
                area_tag="area-0", area_nodes=victims,
                start_s=25.0, attack_duration_s=0.5, stagger_s=12.0,
            ),
        ),
        ScenarioConfig(
            name="attack-gps-tracking",
            app_mix=background,
            attack=AttackSpec(
                kind="gps-tracking", botmaster=PAPER_BOTMASTER, victims=list(PAPER_THEFT_VICTIMS),
                jitter_s=0.02, reports_per_session=10,
            ),
        ),
        ScenarioConfig(
            name="attack-audio-exfil",
            app_mix=background,
            attack=AttackSpec(
                kind="audio-exfil", botmaster=PAPER_BOTMASTER, victims=list(PAPER_THEFT_VICTIMS),
            ),
        ),
        # Throughput demonstration: every attacker floods the area at once.
        ScenarioConfig(
            name="geo-flood-throughput",
            duration_s=60.0,
            app_mix=_apps("BSM"),
            attack=AttackSpec(
                kind="geo-wsmp-flood", attackers=_ddos_attackers(), victims=victims,
                area_tag="area-0", area_nodes=victims, start_s=30.0, attack_duration_s=2.0,
            ),
        ),
    ]
    return {s.name: s for s in scenarios}


PAPER_NETWORK_SCENARIOS = (
    "benign-beacon",
    "benign-safety-event",
    "benign-convenience-event",
    "benign-convenience-ondemand",
    "benign-commercial-content",
    "benign-commercial-service",
    "attack-wsmp-flood",
    "attack-geo-wsmp-flood",
    "attack-gps-tracking",
    "attack-audio-exfil",
)


def get_scenario(name_or_path: str, seed: int | None = None) -> ScenarioConfig:
    scenarios = bundled_scenarios()
    if name_or_path in scenarios:
        cfg = scenarios[name_or_path]
    elif Path(name_or_path).is_file():
        cfg = ScenarioConfig.load(name_or_path)
    else:
        raise ConfigError(
            f"unknown scenario {name_or_path!r}; bundled: {', '.join(sorted(scenarios))}"
        )
    if seed is not None:
        cfg.seed = seed
    return cfg
