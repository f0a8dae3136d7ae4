"""Benign vehicular application profiles.

Network attributes (channel, protocol, TTL, routing, trigger, participants)
follow the published categorisation of the 17 applications.  Packet sizes,
rates and session shapes are desk-scale defaults chosen here; they are not
measured values and every one can be overridden per scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from ..errors import ConfigError

# Provider service identifiers registered with the WAVE service table.
# Flood frames draw PSIDs outside this set.
REGISTERED_PSIDS: dict[str, int] = {
    "BSM": 0x20,
    "CCW": 0x21,
    "CVW": 0x22,
    "EEBL": 0x23,
    "PCN": 0x24,
    "RFN": 0x25,
    "RHCN": 0x26,
    "SVA": 0x27,
    "CRN": 0x28,
    "PAN": 0x80,
    "PSL": 0x81,
    "TOLL": 0x82,
    "TP": 0x83,
}
REGISTERED_PSID_SET = frozenset(REGISTERED_PSIDS.values())


@dataclass(frozen=True)
class AppProfile:
    app_id: str
    category: str  # safety | convenience | commercial
    protocol: str  # WSMP | IP
    channel: str  # CCH | SCH
    ttl: str  # single-hop | multi-hop
    routing: str  # geocast | broadcast | unicast
    trigger: str  # beaconing | event-triggered | on-demand
    participants: str  # V2V | V2I | Internet
    transport: str = "WSMP"  # WSMP | TCP | UDP
    # Traffic shape defaults (declared, not measured)
    payload_mean: float = 200.0
    payload_sd: float = 20.0
    rate_hz: float = 0.0  # beacon frequency
    event_rate: float = 0.0  # events (or sessions) per second per node
    burst_len: int = 1  # messages per event
    burst_gap_s: float = 0.1
    response_mean: float = 0.0  # response payload (request/response apps)
    transfer_bytes: tuple[int, int] = (0, 0)  # bulk session size range
    stream_fps: float = 0.0
    stream_duration_s: tuple[float, float] = (0.0, 0.0)
    extra: dict[str, Any] = field(default_factory=dict)

    def with_params(self, params: dict[str, Any]) -> "AppProfile":
        if not params:
            return self
        known = set(self.__dataclass_fields__)
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f"{self.app_id}: unknown parameters {sorted(unknown)}")
        clean = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
        return replace(self, **clean)


def _p(**kw: Any) -> AppProfile:
    return AppProfile(**kw)


APP_PROFILES: dict[str, AppProfile] = {
    p.app_id: p
    for p in (
        # safety, WSMP on the control channel
        _p(app_id="BSM", category="safety", protocol="WSMP", channel="CCH", ttl="single-hop",
           routing="broadcast", trigger="beaconing", participants="V2V",
           payload_mean=300, payload_sd=20, rate_hz=10.0),
        _p(app_id="CCW", category="safety", protocol="WSMP", channel="CCH", ttl="single-hop",
           routing="broadcast", trigger="beaconing", participants="V2V",
           payload_mean=180, payload_sd=15, rate_hz=10.0),
        _p(app_id="CVW", category="safety", protocol="WSMP", channel="CCH", ttl="single-hop",
           routing="broadcast", trigger="beaconing", participants="V2I",
           payload_mean=120, payload_sd=10, rate_hz=10.0),
        _p(app_id="EEBL", category="safety", protocol="WSMP", channel="CCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=200, payload_sd=15, event_rate=1 / 60, burst_len=5, burst_gap_s=0.1),
        _p(app_id="PCN", category="safety", protocol="WSMP", channel="CCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=220, payload_sd=15, event_rate=1 / 120, burst_len=10, burst_gap_s=0.2),
        _p(app_id="RFN", category="safety", protocol="WSMP", channel="CCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=160, payload_sd=10, event_rate=1 / 45, burst_len=3, burst_gap_s=0.25),
        _p(app_id="RHCN", category="safety", protocol="WSMP", channel="CCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=180, payload_sd=10, event_rate=1 / 90, burst_len=4, burst_gap_s=0.25),
        _p(app_id="SVA", category="safety", protocol="WSMP", channel="CCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=150, payload_sd=10, event_rate=1 / 40, burst_len=3, burst_gap_s=0.2),
        # convenience, WSMP on service channels
        _p(app_id="CRN", category="convenience", protocol="WSMP", channel="SCH", ttl="multi-hop",
           routing="geocast", trigger="event-triggered", participants="V2V",
           payload_mean=250, payload_sd=20, event_rate=1 / 80, burst_len=5, burst_gap_s=0.5),
        _p(app_id="PAN", category="convenience", protocol="WSMP", channel="SCH", ttl="multi-hop",
           routing="unicast", trigger="on-demand", participants="V2I",
           payload_mean=60, payload_sd=5, event_rate=1 / 50, response_mean=320),
        _p(app_id="PSL", category="convenience", protocol="WSMP", channel="SCH", ttl="single-hop",
           routing="unicast", trigger="on-demand", participants="V2I",
           payload_mean=80, payload_sd=5, event_rate=1 / 70, response_mean=450, burst_len=2,
           burst_gap_s=0.05),
        _p(app_id="TOLL", category="convenience", protocol="WSMP", channel="SCH", ttl="single-hop",
           routing="unicast", trigger="event-triggered", participants="V2I",
           payload_mean=150, payload_sd=10, event_rate=1 / 100, response_mean=100),
        _p(app_id="TP", category="convenience", protocol="WSMP", channel="SCH", ttl="multi-hop",
           routing="unicast", trigger="event-triggered", participants="V2I",
           payload_mean=240, payload_sd=20, event_rate=1 / 30, burst_len=3, burst_gap_s=0.3),
        # commercial, IP on service channels
        _p(app_id="CMDD", category="commercial", protocol="IP", channel="SCH", ttl="single-hop",
           routing="unicast", trigger="on-demand", participants="Internet", transport="TCP",
           payload_mean=300, payload_sd=30, event_rate=1 / 90, transfer_bytes=(20_000, 200_000)),
        _p(app_id="RTVR", category="commercial", protocol="IP", channel="SCH", ttl="multi-hop",
           routing="unicast", trigger="on-demand", participants="Internet", transport="UDP",
           payload_mean=1000, payload_sd=120, event_rate=1 / 250, stream_fps=25.0,
           stream_duration_s=(5.0, 20.0)),
        _p(app_id="RVP/D", category="commercial", protocol="IP", channel="SCH", ttl="single-hop",
           routing="unicast", trigger="on-demand", participants="V2I", transport="TCP",
           payload_mean=200, payload_sd=20, event_rate=1 / 100, transfer_bytes=(2_000, 8_000)),
        _p(app_id="SA", category="commercial", protocol="IP", channel="SCH", ttl="single-hop",
           routing="geocast", trigger="on-demand", participants="Internet", transport="UDP",
           payload_mean=90, payload_sd=10, rate_hz=0.2),
    )
}


def get_profile(app_id: str) -> AppProfile:
    try:
        return APP_PROFILES[app_id]
    except KeyError:
        raise ConfigError(f"unknown application id {app_id!r}") from None
