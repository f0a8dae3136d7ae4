"""Observed-traffic shapes: WSM frames, CAN frames, packet records and trace files.

Network traces are JSON-lines (one header object, then one object per
packet).  CAN traces are CSV in the column order of the public car-hacking
dataset, optionally preceded by a ``#``-prefixed JSON header line.
"""

from __future__ import annotations

import csv
import io
import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence, Union

from .errors import (
    LengthMismatchError,
    LengthOverflowError,
    MalformedFrameError,
    TraceFormatError,
    TraceOrderError,
)

SCHEMA_VERSION = "vbotdetect.trace/1"

CCH = 178
SCH_CHANNELS = (172, 174, 176, 180, 182, 184)
DSRC_CHANNELS = frozenset((CCH, *SCH_CHANNELS))

BROADCAST = "broadcast"

TCP_FLAGS = ("FIN", "SYN", "RST", "PSH", "ACK", "URG", "CWR", "ECE")
PROTOCOLS = ("TCP", "UDP", "WSMP")

CAN_LABELS = ("benign", "dos", "fuzzy", "gear", "rpm")
CAN_ID_MAX = 0x7FF

_WSM_HEADER = struct.Struct(">BIBBBH")
WSM_HEADER_LEN = _WSM_HEADER.size  # 10 bytes
WSM_MAX_PAYLOAD = 0xFFFF


# --------------------------------------------------------------------------
# WSM frames


@dataclass(frozen=True)
class WsmFrame:
    wsmp_version: int
    psid: int
    channel_number: int
    data_rate: int
    wave_element_id: int
    payload: bytes = b""
    wsm_length: int | None = None

    def __post_init__(self) -> None:
        if self.wsm_length is None:
            object.__setattr__(self, "wsm_length", len(self.payload))
        if self.wsm_length != len(self.payload):
            raise LengthMismatchError(
                f"wsm_length {self.wsm_length} != payload length {len(self.payload)}"
            )
        if self.channel_number not in DSRC_CHANNELS:
            raise MalformedFrameError(f"channel {self.channel_number} is not a DSRC channel")
        for name, value, bits in (
            ("wsmp_version", self.wsmp_version, 8),
            ("psid", self.psid, 32),
            ("data_rate", self.data_rate, 8),
            ("wave_element_id", self.wave_element_id, 8),
        ):
            if not 0 <= value < (1 << bits):
                raise MalformedFrameError(f"{name}={value} does not fit in {bits} bits")


def encode_wsm(frame: WsmFrame) -> bytes:
    """Serialize a frame as ``version|psid|channel|rate|element|length|payload``."""
    if len(frame.payload) > WSM_MAX_PAYLOAD:
        raise LengthOverflowError(f"payload of {len(frame.payload)} bytes exceeds {WSM_MAX_PAYLOAD}")
    header = _WSM_HEADER.pack(
        frame.wsmp_version,
        frame.psid,
        frame.channel_number,
        frame.data_rate,
        frame.wave_element_id,
        len(frame.payload),
    )
    return header + bytes(frame.payload)


def decode_wsm(data: bytes) -> WsmFrame:
    if len(data) < WSM_HEADER_LEN:
        raise MalformedFrameError(f"need at least {WSM_HEADER_LEN} bytes, got {len(data)}")
    version, psid, channel, rate, element, length = _WSM_HEADER.unpack_from(data)
    payload = bytes(data[WSM_HEADER_LEN:])
    if length != len(payload):
        raise LengthMismatchError(f"declared length {length}, {len(payload)} payload bytes present")
    return WsmFrame(version, psid, channel, rate, element, payload, length)


# --------------------------------------------------------------------------
# Records


@dataclass(slots=True)
class PacketRecord:
    """One timestamped packet observation.

    ``observer`` names the node that captured the packet when it differs from
    the sender (e.g. a geo-broadcast frame delivered to each receiver); it is
    part of the flow key so that each receiver meters its own flow.
    ``psid`` and ``channel`` are only meaningful for WSMP.
    """

    timestamp: float
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    protocol: str
    total_len: int
    header_len: int
    payload_len: int
    tcp_flags: tuple[str, ...] = ()
    init_window: int = 0
    geo_scope: str | None = None
    app_tag: str = ""
    observer: str | None = None
    psid: int | None = None
    channel: int | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "ts": self.timestamp,
            "src": self.src_addr,
            "dst": self.dst_addr,
            "sport": self.src_port,
            "dport": self.dst_port,
            "proto": self.protocol,
            "len": self.total_len,
            "hlen": self.header_len,
            "plen": self.payload_len,
        }
        if self.tcp_flags:
            out["flags"] = list(self.tcp_flags)
        if self.init_window:
            out["win"] = self.init_window
        if self.geo_scope is not None:
            out["geo"] = self.geo_scope
        out["app"] = self.app_tag
        if self.observer is not None:
            out["obs"] = self.observer
        if self.psid is not None:
            out["psid"] = self.psid
        if self.channel is not None:
            out["chan"] = self.channel
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "PacketRecord":
        flags = obj.get("flags", ())
        return cls(
            timestamp=float(obj["ts"]),
            src_addr=obj["src"],
            dst_addr=obj["dst"],
            src_port=int(obj["sport"]),
            dst_port=int(obj["dport"]),
            protocol=obj["proto"],
            total_len=int(obj["len"]),
            header_len=int(obj["hlen"]),
            payload_len=int(obj["plen"]),
            tcp_flags=canonical_flags(flags),
            init_window=int(obj.get("win", 0)),
            geo_scope=obj.get("geo"),
            app_tag=obj.get("app", ""),
            observer=obj.get("obs"),
            psid=obj.get("psid"),
            channel=obj.get("chan"),
        )


_FLAG_CACHE: dict[frozenset, tuple[str, ...]] = {}


def canonical_flags(flags: Iterable[str]) -> tuple[str, ...]:
    """Return ``flags`` as a tuple in canonical TCP_FLAGS order (cached)."""
    key = frozenset(flags)
    try:
        return _FLAG_CACHE[key]
    except KeyError:
        unknown = key.difference(TCP_FLAGS)
        if unknown:
            raise TraceFormatError(f"unknown TCP flags {sorted(unknown)}")
        value = tuple(f for f in TCP_FLAGS if f in key)
        _FLAG_CACHE[key] = value
        return value


@dataclass(slots=True)
class CanRecord:
    timestamp: float
    can_id: int
    dlc: int
    data: tuple[int | None, ...]
    label: str = "benign"

    def __post_init__(self) -> None:
        if not 0 <= self.dlc <= 8:
            raise TraceFormatError(f"DLC {self.dlc} outside [0, 8]")
        if not 0 <= self.can_id <= CAN_ID_MAX:
            raise TraceFormatError(f"CAN ID {self.can_id:#x} does not fit in 11 bits")
        if len(self.data) != 8:
            data = tuple(self.data) + (None,) * (8 - len(self.data))
            if len(data) != 8:
                raise TraceFormatError("CAN frame carries more than 8 data slots")
            self.data = data


Record = Union[PacketRecord, CanRecord]
TraceKind = Literal["network", "can"]


@dataclass
class TraceFile:
    kind: TraceKind
    records: list = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)
    schema: str = SCHEMA_VERSION

    def check_sorted(self) -> None:
        check_sorted(self.records)


def check_sorted(records: Sequence[Record]) -> None:
    prev = float("-inf")
    for i, rec in enumerate(records):
        if rec.timestamp < prev:
            raise TraceOrderError(i)
        prev = rec.timestamp


# --------------------------------------------------------------------------
# Writers


CAN_COLUMNS = ("Timestamp", "CAN_ID", "DLC", *(f"DATA{i}" for i in range(8)), "Flag", "Label")


def _header_obj(trace: TraceFile) -> dict[str, Any]:
    return {"schema": trace.schema, "kind": trace.kind, "meta": trace.meta}


def dumps_trace(trace: TraceFile) -> str:
    trace.check_sorted()
    if trace.kind == "network":
        lines = [json.dumps(_header_obj(trace), separators=(",", ":"), sort_keys=True)]
        lines.extend(json.dumps(r.to_json(), separators=(",", ":")) for r in trace.records)
        return "\n".join(lines) + "\n"
    if trace.kind == "can":
        buf = io.StringIO()
        buf.write("#" + json.dumps(_header_obj(trace), separators=(",", ":"), sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CAN_COLUMNS)
        for r in trace.records:
            data = ["" if b is None else f"{b:02x}" for b in r.data]
            flag = "R" if r.label == "benign" else "T"
            writer.writerow([f"{r.timestamp:.6f}", f"{r.can_id:04x}", r.dlc, *data, flag, r.label])
        return buf.getvalue()
    raise TraceFormatError(f"unknown trace kind {trace.kind!r}")


def write_trace(trace: TraceFile, path: str | Path) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8")


# --------------------------------------------------------------------------
# Readers


_PUBLIC_ATTACKS = (
    ("dos", re.compile(r"dos", re.I)),
    ("fuzzy", re.compile(r"fuzz", re.I)),
    ("gear", re.compile(r"gear", re.I)),
    ("rpm", re.compile(r"rpm", re.I)),
)


def attack_label_from_name(name: str) -> str | None:
    """Guess the attack label of a public car-hacking file from its name."""
    for label, pattern in _PUBLIC_ATTACKS:
        if pattern.search(name):
            return label
    return None


def read_trace(path: str | Path, kind: TraceKind, attack_label: str | None = None) -> TraceFile:
    """Read a trace written by :func:`write_trace`.

    For ``kind="can"`` the public car-hacking CSV layout (no header, variable
    number of data columns, trailing R/T flag) is accepted as well; injected
    (``T``) rows get ``attack_label``, or a label inferred from the file name.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if kind == "network":
        trace = _parse_network(text)
    elif kind == "can":
        if attack_label is None:
            attack_label = attack_label_from_name(path.name)
        trace = _parse_can(text, attack_label)
    else:
        raise TraceFormatError(f"unknown trace kind {kind!r}")
    trace.check_sorted()
    return trace


def _check_header(obj: Any, kind: str) -> dict[str, Any]:
    if not isinstance(obj, dict) or obj.get("schema") != SCHEMA_VERSION:
        schema = obj.get("schema") if isinstance(obj, dict) else None
        raise TraceFormatError(f"unrecognized trace schema {schema!r}")
    if obj.get("kind") != kind:
        raise TraceFormatError(f"trace kind {obj.get('kind')!r}, expected {kind!r}")
    return obj


def _parse_network(text: str) -> TraceFile:
    lines = text.splitlines()
    if not lines:
        raise TraceFormatError("empty trace file (missing header)")
    try:
        header = _check_header(json.loads(lines[0]), "network")
        records = [PacketRecord.from_json(json.loads(line)) for line in lines[1:] if line.strip()]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed network trace: {exc}") from exc
    return TraceFile("network", records, header.get("meta", {}), header["schema"])


def _parse_can(text: str, attack_label: str | None) -> TraceFile:
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        try:
            header = _check_header(json.loads(lines[0][1:]), "can")
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"malformed CAN trace header: {exc}") from exc
        rows = list(csv.reader(lines[1:]))
        if not rows or tuple(rows[0]) != CAN_COLUMNS:
            raise TraceFormatError("CAN trace column header does not match")
        records = [_parse_own_can_row(row, i + 2) for i, row in enumerate(rows[1:]) if row]
        return TraceFile("can", records, header.get("meta", {}), header["schema"])

    records = [
        _parse_public_can_row(row, i + 1, attack_label)
        for i, row in enumerate(csv.reader(lines))
        if row
    ]
    meta = {"source": "car-hacking-csv"}
    if attack_label:
        meta["attack"] = attack_label
    return TraceFile("can", records, meta)


def _parse_own_can_row(row: list[str], lineno: int) -> CanRecord:
    if len(row) != len(CAN_COLUMNS):
        raise TraceFormatError(f"line {lineno}: expected {len(CAN_COLUMNS)} columns, got {len(row)}")
    try:
        dlc = int(row[2])
        data = tuple(int(b, 16) if b else None for b in row[3:11])
        return CanRecord(float(row[0]), int(row[1], 16), dlc, data, row[12])
    except ValueError as exc:
        raise TraceFormatError(f"line {lineno}: {exc}") from exc


def _parse_public_can_row(row: list[str], lineno: int, attack_label: str | None) -> CanRecord:
    row = [c.strip() for c in row]
    try:
        ts = float(row[0])
        can_id = int(row[1], 16)
        dlc = int(row[2])
    except (ValueError, IndexError) as exc:
        raise TraceFormatError(f"line {lineno}: unrecognized CAN row {row!r}") from exc
    if len(row) < 3 + dlc + 1:
        raise TraceFormatError(f"line {lineno}: DLC {dlc} but only {len(row) - 4} data columns")
    try:
        data = tuple(int(b, 16) for b in row[3 : 3 + dlc])
    except ValueError as exc:
        raise TraceFormatError(f"line {lineno}: bad data byte: {exc}") from exc
    flag = row[3 + dlc]
    if flag == "R":
        label = "benign"
    elif flag == "T":
        if attack_label is None:
            raise TraceFormatError(f"line {lineno}: injected frame but the file's attack type is unknown")
        label = attack_label
    else:
        raise TraceFormatError(f"line {lineno}: unknown flag {flag!r}")
    return CanRecord(ts, can_id, dlc, data, label)
