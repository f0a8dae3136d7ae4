"""Seeded synthesis of labeled vehicular packet traces.

Every stream (one application on one node, one attacker, one victim) draws
from its own generator seeded by ``(scenario seed, stream id)``, so adding a
stream never perturbs the others and a ``(config, seed)`` pair fixes every
emitted byte.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from operator import attrgetter
from typing import Callable, Iterable

import numpy as np

from ..capture import BROADCAST, CCH, SCH_CHANNELS, PacketRecord, TraceFile, canonical_flags
from ..errors import ConfigError
from .apps import APP_PROFILES, REGISTERED_PSID_SET, REGISTERED_PSIDS, AppProfile, get_profile
from .scenario import AttackSpec, ScenarioConfig

WSMP_HEADER = 10
TCP_HEADER = 60  # IPv6 + TCP
UDP_HEADER = 48  # IPv6 + UDP
MSS = 1400

ATTACK_TAGS = ("gps-tracking", "phishing", "wsmp-flood", "geo-wsmp-flood")
NETWORK_CLASSES = ("benign-wsmp", "benign-ip", "gps-tracking", "phishing", "wsmp-flood", "geo-wsmp-flood")
BENIGN_CLASSES = ("benign-wsmp", "benign-ip")

GPS_PAYLOAD = 4 + 4 + 2 + 2 + 2  # latitude, longitude, speed, time, heading
GPS_PORT = 4444
EXFIL_PORT = 8443

_SYN = canonical_flags(["SYN"])
_SYNACK = canonical_flags(["SYN", "ACK"])
_ACK = canonical_flags(["ACK"])
_PSHACK = canonical_flags(["PSH", "ACK"])
_FINACK = canonical_flags(["FIN", "ACK"])


def vehicle(i: int) -> str:
    return f"node{i}"


def rsu(k: int) -> str:
    return f"rsu{k}"


def server(k: int) -> str:
    return f"srv{k}"


def record_class(rec: PacketRecord) -> str:
    """Class label of one record: the attack tag, or benign-wsmp / benign-ip."""
    if rec.app_tag in ATTACK_TAGS:
        return rec.app_tag
    return "benign-wsmp" if rec.protocol == "WSMP" else "benign-ip"


def _stream_rng(seed: int, *parts: object) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFF]
    for p in parts:
        key.append(zlib.crc32(str(p).encode()) if not isinstance(p, int) else p & 0xFFFFFFFF)
    return np.random.default_rng(key)


def _ts(t: float) -> float:
    return round(float(t), 6)


def _app_channel(profile: AppProfile) -> int:
    if profile.channel == "CCH":
        return CCH
    return SCH_CHANNELS[list(APP_PROFILES).index(profile.app_id) % len(SCH_CHANNELS)]


def _sizes(rng: np.random.Generator, mean: float, sd: float, n: int, lo: int = 1, hi: int = MSS) -> np.ndarray:
    return np.clip(np.rint(rng.normal(mean, sd, n)), lo, hi).astype(int)


def _poisson_times(rng: np.random.Generator, rate: float, duration: float) -> np.ndarray:
    if rate <= 0:
        return np.empty(0)
    expected = rate * duration
    n = rng.poisson(expected)
    return np.sort(rng.uniform(0.0, duration, n))


@dataclass
class _Builder:
    cfg: ScenarioConfig
    records: list[PacketRecord] = field(default_factory=list)
    _ports: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.cfg.duration_s

    def ephemeral_port(self, node: str, app: str) -> int:
        key = (node, app)
        base = 49152 + (zlib.crc32(app.encode()) % 64) * 256
        n = self._ports.get(key, 0)
        self._ports[key] = n + 1
        return base + n % 256 if n < 256 else 49152 + (base + n) % 16000

    def wsm(self, t: float, src: str, dst: str, payload: int, tag: str, psid: int, channel: int,
            geo: str | None = None, observer: str | None = None) -> None:
        if not 0.0 <= t < self.duration:
            return
        self.records.append(
            PacketRecord(_ts(t), src, dst, 0, 0, "WSMP", WSMP_HEADER + int(payload), WSMP_HEADER,
                         int(payload), (), 0, geo, tag, observer, psid, channel)
        )

    def ip(self, t: float, src: str, dst: str, sport: int, dport: int, proto: str, payload: int,
           tag: str, flags: tuple[str, ...] = (), window: int = 0, geo: str | None = None) -> None:
        if not 0.0 <= t < self.duration:
            return
        hdr = TCP_HEADER if proto == "TCP" else UDP_HEADER
        self.records.append(
            PacketRecord(_ts(t), src, dst, sport, dport, proto, hdr + int(payload), hdr, int(payload),
                         flags, window, geo, tag)
        )

    def trace(self) -> TraceFile:
        self.records.sort(key=attrgetter("timestamp"))
        meta = {
            "scenario": self.cfg.name,
            "seed": self.cfg.seed,
            "duration_s": self.cfg.duration_s,
            "node_count": self.cfg.node_count,
        }
        if self.cfg.attack is not None:
            meta["attack"] = self.cfg.attack.kind
        return TraceFile("network", self.records, meta)

    # -- TCP session helper -------------------------------------------------

    def tcp_session(self, rng: np.random.Generator, t0: float, client: str, srv: str, dport: int,
                    tag: str, request: int, upload: int, download: int, rtt: float,
                    seg_gap: float = 0.001) -> float:
        """Handshake, request, bulk transfer, single FIN from the client."""
        sport = self.ephemeral_port(client, tag)
        t = t0
        self.ip(t, client, srv, sport, dport, "TCP", 0, tag, _SYN, 65535)
        t += rtt
        self.ip(t, srv, client, dport, sport, "TCP", 0, tag, _SYNACK, 28960)
        t += rtt / 2
        self.ip(t, client, srv, sport, dport, "TCP", 0, tag, _ACK)
        if request:
            t += 0.0005
            self.ip(t, client, srv, sport, dport, "TCP", request, tag, _PSHACK)
        for direction, total in ((0, upload), (1, download)):
            if total <= 0:
                continue
            src, dst, s_p, d_p = (client, srv, sport, dport) if direction == 0 else (srv, client, dport, sport)
            n = math.ceil(total / MSS)
            gaps = seg_gap * (1.0 + 0.2 * rng.uniform(-1, 1, n))
            sent = 0
            for k in range(n):
                t += float(gaps[k])
                size = min(MSS, total - sent)
                sent += size
                flags = _PSHACK if k == n - 1 else _ACK
                self.ip(t, src, dst, s_p, d_p, "TCP", size, tag, flags)
                if k % 2 == 1 or k == n - 1:
                    self.ip(t + rtt / 2, dst, src, d_p, s_p, "TCP", 0, tag, _ACK)
            t += rtt / 2
        t += rtt / 2 + 0.001
        self.ip(t, client, srv, sport, dport, "TCP", 0, tag, _FINACK)
        return t


# --------------------------------------------------------------------------
# Benign applications


def _participants(cfg: ScenarioConfig, nodes: list[int] | None) -> list[int]:
    return list(range(cfg.node_count)) if nodes is None else sorted(set(nodes))


def _emit_app(b: _Builder, profile: AppProfile, nodes: list[int]) -> None:
    cfg = b.cfg
    tag = profile.app_id
    psid = REGISTERED_PSIDS.get(tag, 0)
    chan = _app_channel(profile)
    dur = cfg.duration_s

    if profile.trigger == "beaconing" and profile.protocol == "WSMP":
        senders = [rsu(k) for k in range(cfg.rsu_count)] if profile.participants == "V2I" else [vehicle(i) for i in nodes]
        period = 1.0 / profile.rate_hz
        for s in senders:
            rng = _stream_rng(cfg.seed, tag, s)
            phase = rng.uniform(0.0, period)
            n = int(math.ceil((dur - phase) / period))
            times = phase + period * np.arange(n) + rng.uniform(-0.1, 0.1, n) * period
            sizes = _sizes(rng, profile.payload_mean, profile.payload_sd, n)
            for t, size in zip(times.tolist(), sizes.tolist()):
                b.wsm(t, s, BROADCAST, size, tag, psid, chan)
        return

    if profile.protocol == "WSMP" and profile.routing in ("geocast", "broadcast"):
        for i in nodes:
            s = vehicle(i)
            rng = _stream_rng(cfg.seed, tag, s)
            for ev in _poisson_times(rng, profile.event_rate, dur).tolist():
                zone = f"zone{int(rng.integers(0, 8))}"
                sizes = _sizes(rng, profile.payload_mean, profile.payload_sd, profile.burst_len)
                for k in range(profile.burst_len):
                    t = ev + k * profile.burst_gap_s * (1.0 + 0.1 * rng.uniform(-1, 1))
                    b.wsm(t, s, BROADCAST, int(sizes[k]), tag, psid, chan, geo=zone)
        return

    if profile.protocol == "WSMP":  # unicast with a roadside unit
        for i in nodes:
            s = vehicle(i)
            peer = rsu(i % cfg.rsu_count)
            rng = _stream_rng(cfg.seed, tag, s)
            for ev in _poisson_times(rng, profile.event_rate, dur).tolist():
                t = ev
                sizes = _sizes(rng, profile.payload_mean, profile.payload_sd, profile.burst_len)
                for k in range(profile.burst_len):
                    b.wsm(t, s, peer, int(sizes[k]), tag, psid, chan)
                    if profile.response_mean:
                        reply = t + rng.uniform(0.005, 0.02)
                        size = _sizes(rng, profile.response_mean, profile.response_mean * 0.1, 1)[0]
                        b.wsm(reply, peer, s, int(size), tag, psid, chan)
                    t += profile.burst_gap_s * (1.0 + 0.1 * rng.uniform(-1, 1))
        return

    # IP applications
    if profile.transport == "TCP":
        for i in nodes:
            client = vehicle(i)
            srv = server(i % cfg.server_count) if profile.participants == "Internet" else rsu(i % cfg.rsu_count)
            rtt_lo, rtt_hi = (0.02, 0.08) if profile.participants == "Internet" else (0.002, 0.01)
            rng = _stream_rng(cfg.seed, tag, client)
            busy_until = -1.0
            for ev in _poisson_times(rng, profile.event_rate, dur).tolist():
                if ev <= busy_until:
                    continue
                request = int(_sizes(rng, profile.payload_mean, profile.payload_sd, 1)[0])
                download = int(rng.integers(profile.transfer_bytes[0], profile.transfer_bytes[1] + 1))
                busy_until = b.tcp_session(rng, ev, client, srv, 80 if tag == "CMDD" else 443, tag,
                                           request, 0, download, float(rng.uniform(rtt_lo, rtt_hi)))
        return

    if tag == "RTVR":
        for i in nodes:
            client = vehicle(i)
            srv = server(i % cfg.server_count)
            rng = _stream_rng(cfg.seed, tag, client)
            busy_until = -1.0
            for ev in _poisson_times(rng, profile.event_rate, dur).tolist():
                if ev <= busy_until:
                    continue
                sport = b.ephemeral_port(client, tag)
                length = float(rng.uniform(*profile.stream_duration_s))
                n = int(length * profile.stream_fps)
                times = ev + np.arange(n) / profile.stream_fps + rng.uniform(0, 0.004, n)
                sizes = _sizes(rng, profile.payload_mean, profile.payload_sd, n)
                for t, size in zip(times.tolist(), sizes.tolist()):
                    b.ip(t, client, srv, sport, 5004, "UDP", size, tag)
                for k in range(1, int(length) + 1):
                    b.ip(ev + k + 0.01, srv, client, 5004, sport, "UDP", 64, tag)
                busy_until = ev + length + 1.0
        return

    if tag == "SA":
        # Announcements from each service provider, plus on-demand queries.
        period = 1.0 / profile.rate_hz
        for k in range(cfg.server_count):
            s = server(k)
            rng = _stream_rng(cfg.seed, tag, s)
            phase = rng.uniform(0.0, period)
            n = int(math.ceil((dur - phase) / period))
            sizes = _sizes(rng, profile.payload_mean, profile.payload_sd, n)
            for j in range(n):
                b.ip(phase + j * period, s, BROADCAST, 7000, 7000, "UDP", int(sizes[j]), tag, geo=f"zone{k}")
        for i in nodes:
            client = vehicle(i)
            srv = server(i % cfg.server_count)
            rng = _stream_rng(cfg.seed, tag, client)
            for ev in _poisson_times(rng, 1 / 120, dur).tolist():
                sport = b.ephemeral_port(client, tag)
                b.ip(ev, client, srv, sport, 7001, "UDP", int(_sizes(rng, 70, 8, 1)[0]), tag)
                b.ip(ev + rng.uniform(0.02, 0.08), srv, client, 7001, sport, "UDP",
                     int(_sizes(rng, 420, 40, 1)[0]), tag)
        return

    raise ConfigError(f"no traffic model for application {tag!r}")


def _emit_benign(b: _Builder) -> None:
    for spec in b.cfg.app_mix:
        profile = get_profile(spec.app_id).with_params(spec.params)
        _emit_app(b, profile, _participants(b.cfg, spec.nodes))


def gen_benign(config: ScenarioConfig) -> TraceFile:
    """Benign application mix only."""
    config.validate()
    if not config.app_mix:
        raise ConfigError("app_mix is empty")
    b = _Builder(config)
    _emit_benign(b)
    return b.trace()


# --------------------------------------------------------------------------
# Attacks


def _require_attack(config: ScenarioConfig, kind: str) -> AttackSpec:
    config.validate()
    a = config.attack
    if a is None or a.kind != kind:
        raise ConfigError(f"scenario needs an attack spec of kind {kind!r}")
    return a


def _draw_unregistered_psids(rng: np.random.Generator, n: int) -> np.ndarray:
    psids = rng.integers(0, 1 << 32, n, dtype=np.uint64)
    bad = np.isin(psids, np.fromiter(REGISTERED_PSID_SET, dtype=np.uint64))
    while bad.any():
        psids[bad] = rng.integers(0, 1 << 32, int(bad.sum()), dtype=np.uint64)
        bad = np.isin(psids, np.fromiter(REGISTERED_PSID_SET, dtype=np.uint64))
    return psids


def _flood_schedule(b: _Builder, a: AttackSpec, j: int, attacker: str) -> tuple[np.random.Generator, np.ndarray]:
    if a.rate <= 0:
        raise ConfigError("flood rate must be positive")
    start = a.start_s + j * a.stagger_s
    end = b.duration if a.attack_duration_s is None else min(b.duration, start + a.attack_duration_s)
    rng = _stream_rng(b.cfg.seed, "flood", attacker)
    n = max(0, int(math.floor((end - start) * a.rate)))
    period = 1.0 / a.rate
    times = start + period * np.arange(n) + rng.uniform(0.0, 0.5, n) * period
    return rng, times


def gen_wsmp_flood(config: ScenarioConfig) -> TraceFile:
    """Unicast WSM floods with unregistered PSIDs, over the benign background."""
    a = _require_attack(config, "wsmp-flood")
    if not a.attackers or not a.victims:
        raise ConfigError("wsmp-flood needs at least one attacker and one victim")
    b = _Builder(config)
    _emit_benign(b)
    victims = [vehicle(v) for v in a.victims]
    for j, att in enumerate(sorted(a.attackers)):
        src = vehicle(att)
        rng, times = _flood_schedule(b, a, j, src)
        n = len(times)
        psids = _draw_unregistered_psids(rng, n).tolist()
        sizes = rng.integers(a.flood_payload[0], a.flood_payload[1] + 1, n).tolist()
        for k, t in enumerate(times.tolist()):
            b.wsm(t, src, victims[(k + j) % len(victims)], sizes[k], "wsmp-flood", psids[k], CCH)
    return b.trace()


def geo_receivers(a: AttackSpec, attacker: int) -> list[int]:
    area = set(a.area_nodes or ())
    if a.neighbor_map is not None:
        area &= set(a.neighbor_map.get(attacker, ()))
    area.discard(attacker)
    return sorted(area)


def gen_geo_wsmp_flood(config: ScenarioConfig) -> TraceFile:
    """Broadcast WSM floods delivered to every node of a geographic area."""
    a = _require_attack(config, "geo-wsmp-flood")
    if not a.attackers:
        raise ConfigError("geo-wsmp-flood needs at least one attacker")
    if not a.area_nodes or not a.area_tag:
        raise ConfigError("geo-wsmp-flood needs a non-empty area")
    b = _Builder(config)
    _emit_benign(b)
    for j, att in enumerate(sorted(a.attackers)):
        src = vehicle(att)
        receivers = [vehicle(r) for r in geo_receivers(a, att)]
        rng, times = _flood_schedule(b, a, j, src)
        n = len(times)
        psids = _draw_unregistered_psids(rng, n).tolist()
        sizes = rng.integers(a.flood_payload[0], a.flood_payload[1] + 1, n).tolist()
        for k, t in enumerate(times.tolist()):
            for r in receivers:
                b.wsm(t, src, BROADCAST, sizes[k], "geo-wsmp-flood", psids[k], CCH,
                      geo=a.area_tag, observer=r)
    return b.trace()


def gen_gps_tracking(config: ScenarioConfig) -> TraceFile:
    """Each victim streams a 14-byte position report to the botmaster every second."""
    a = _require_attack(config, "gps-tracking")
    if a.botmaster is None or not a.victims:
        raise ConfigError("gps-tracking needs a botmaster and victims")
    b = _Builder(config)
    _emit_benign(b)
    master = vehicle(a.botmaster)
    for v in sorted(a.victims):
        src = vehicle(v)
        rng = _stream_rng(config.seed, "gps", src)
        offset = rng.uniform(0.0, 1.0)
        n = int(math.ceil(config.duration_s - offset))
        jitter = rng.uniform(-a.jitter_s, a.jitter_s, n) if a.jitter_s > 0 else np.zeros(n)
        sport = b.ephemeral_port(src, "gps")
        for k in range(n):
            if a.reports_per_session and k and k % a.reports_per_session == 0:
                sport = b.ephemeral_port(src, "gps")
            b.ip(offset + k + float(jitter[k]), src, master, sport, GPS_PORT, "UDP", GPS_PAYLOAD, "gps-tracking")
    return b.trace()


def gen_audio_exfil(config: ScenarioConfig) -> TraceFile:
    """Victims upload recorded audio to the botmaster every 10-20 s over fresh TCP sessions."""
    a = _require_attack(config, "audio-exfil")
    if a.botmaster is None or not a.victims:
        raise ConfigError("audio-exfil needs a botmaster and victims")
    b = _Builder(config)
    _emit_benign(b)
    master = vehicle(a.botmaster)
    for v in sorted(a.victims):
        src = vehicle(v)
        rng = _stream_rng(config.seed, "exfil", src)
        lo, hi = a.period_s
        period = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        t = float(rng.uniform(0.0, 1.0))
        while t < config.duration_s:
            rtt = float(rng.uniform(0.03, 0.1))
            b.tcp_session(rng, t, src, master, EXFIL_PORT, "phishing", 0, a.burst_bytes, 0, rtt,
                          seg_gap=a.segment_gap_s)
            t += period
    return b.trace()


GENERATORS: dict[str, Callable[[ScenarioConfig], TraceFile]] = {
    "wsmp-flood": gen_wsmp_flood,
    "geo-wsmp-flood": gen_geo_wsmp_flood,
    "gps-tracking": gen_gps_tracking,
    "audio-exfil": gen_audio_exfil,
}


def generate(config: ScenarioConfig) -> TraceFile:
    """Dispatch on the scenario's attack kind (benign mix when there is none)."""
    if config.attack is None:
        return gen_benign(config)
    return GENERATORS[config.attack.kind](config)


# --------------------------------------------------------------------------
# Throughput under flooding


@dataclass
class GoodputSeries:
    bin_s: float
    baseline: list[float]  # benign WSM frames offered to the victims per bin
    delivered: list[float]  # frames the victims could process under contention

    def ratio(self, start_s: float, end_s: float) -> float:
        lo = int(start_s // self.bin_s)
        hi = int(math.ceil(end_s / self.bin_s))
        base = sum(self.baseline[lo:hi])
        return sum(self.delivered[lo:hi]) / base if base else 1.0


def goodput_series(trace: TraceFile, victims: Iterable[int], capacity_fps: float = 1000.0,
                   bin_s: float = 1.0, neighbor_map: dict[int, list[int]] | None = None) -> GoodputSeries:
    """Benign WSM goodput at the victims with and without flood contention.

    Each victim processes at most ``capacity_fps`` WSM frames per second (PSID
    lookups); when benign and flood arrivals together exceed that budget the
    benign share is delivered pro rata.
    """
    victim_ids = sorted(set(victims))
    names = {vehicle(v): v for v in victim_ids}
    neighbours = None
    if neighbor_map is not None:
        neighbours = {vehicle(v): {vehicle(n) for n in neighbor_map.get(v, ())} for v in victim_ids}
    duration = float(trace.meta.get("duration_s", trace.records[-1].timestamp + bin_s if trace.records else bin_s))
    nbins = int(math.ceil(duration / bin_s))
    benign = np.zeros((len(victim_ids), nbins))
    flood = np.zeros((len(victim_ids), nbins))
    index = {name: i for i, name in enumerate(names)}
    for rec in trace.records:
        if rec.protocol != "WSMP":
            continue
        k = min(int(rec.timestamp // bin_s), nbins - 1)
        if rec.app_tag in ("wsmp-flood", "geo-wsmp-flood"):
            target = rec.observer if rec.observer is not None else rec.dst_addr
            if target in index:
                flood[index[target], k] += 1
            continue
        if rec.dst_addr == BROADCAST:
            for name, i in index.items():
                if rec.src_addr != name and (neighbours is None or rec.src_addr in neighbours[name]):
                    benign[i, k] += 1
        elif rec.dst_addr in index:
            benign[index[rec.dst_addr], k] += 1
    budget = capacity_fps * bin_s
    offered = benign + flood
    share = np.where(offered > budget, budget / np.maximum(offered, 1e-12), 1.0)
    delivered = benign * share
    return GoodputSeries(bin_s, benign.sum(axis=0).tolist(), delivered.sum(axis=0).tolist())
