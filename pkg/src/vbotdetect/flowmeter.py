"""Bidirectional flow assembly and per-flow statistical features.

Times are handled internally as integer microseconds, and every accumulator
is an integer sum, so means and population standard deviations are computed
from exact sums rather than running floating-point updates.

Conventions (documented in the README):

* packet length means the transport payload length; header bytes are counted
  separately;
* active/idle episodes split at gaps larger than ``activity_timeout_s``
  (default 5 s);
* a bulk is a run of at least 4 consecutive data packets (payload > 0) in one
  direction, no data packet in the other direction in between, with gaps of
  at most 1 s;
* subflows split the flow at gaps larger than 1 s and subflow features are
  totals divided by the number of subflows;
* rates of a zero-duration flow are 0 and the flow is flagged degenerate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .capture import TCP_FLAGS, PacketRecord, TraceFile
from .errors import TraceFormatError, TraceOrderError
from .traffic.network import ATTACK_TAGS

US = 1_000_000
BULK_MIN_PKTS = 4
BULK_GAP_US = 1 * US
SUBFLOW_GAP_US = 1 * US

FEATURE_NAMES: tuple[str, ...] = (
    "Flow Duration",
    "Tot Fwd Pkts", "Tot Bwd Pkts",
    "TotLen Fwd Pkts", "TotLen Bwd Pkts",
    "Fwd Pkt Len Max", "Fwd Pkt Len Min", "Fwd Pkt Len Mean", "Fwd Pkt Len Std",
    "Bwd Pkt Len Max", "Bwd Pkt Len Min", "Bwd Pkt Len Mean", "Bwd Pkt Len Std",
    "Flow Byts/s", "Flow Pkts/s",
    "Flow IAT Mean", "Flow IAT Std", "Flow IAT Max", "Flow IAT Min",
    "Fwd IAT Tot", "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max", "Fwd IAT Min",
    "Bwd IAT Tot", "Bwd IAT Mean", "Bwd IAT Std", "Bwd IAT Max", "Bwd IAT Min",
    "Fwd PSH Flags", "Bwd PSH Flags", "Fwd URG Flags", "Bwd URG Flags",
    "Fwd Header Len", "Bwd Header Len",
    "Fwd Pkts/s", "Bwd Pkts/s",
    "Pkt Len Min", "Pkt Len Max", "Pkt Len Mean", "Pkt Len Std",
    "FIN Flag Cnt", "SYN Flag Cnt", "RST Flag Cnt", "PSH Flag Cnt",
    "ACK Flag Cnt", "URG Flag Cnt", "CWR Flag Cnt", "ECE Flag Cnt",
    "Down/Up Ratio",
    "Pkt Size Avg", "Fwd Seg Size Avg", "Bwd Seg Size Avg",
    "Fwd Byts/b Avg", "Fwd Pkts/b Avg", "Fwd Blk Rate Avg",
    "Bwd Byts/b Avg", "Bwd Pkts/b Avg", "Bwd Blk Rate Avg",
    "Subflow Fwd Pkts", "Subflow Fwd Byts", "Subflow Bwd Pkts", "Subflow Bwd Byts",
    "Init Fwd Win Byts", "Init Bwd Win Byts",
    "Fwd Act Data Pkts", "Fwd Seg Size Min",
    "Active Mean", "Active Std", "Active Max", "Active Min",
    "Idle Mean", "Idle Std", "Idle Max", "Idle Min",
)

ID_COLUMNS = ("Flow ID", "Src", "Src Port", "Dst", "Dst Port", "Protocol", "Observer", "Timestamp", "Degenerate")
LABEL_COLUMN = "Label"


def to_us(t: float) -> int:
    return int(round(t * US))


# --------------------------------------------------------------------------
# Keys


@dataclass(frozen=True, slots=True)
class FlowKey:
    addr_a: str
    port_a: int
    addr_b: str
    port_b: int
    protocol: str
    observer: str = ""

    def __str__(self) -> str:
        base = f"{self.addr_a}:{self.port_a}-{self.addr_b}:{self.port_b}-{self.protocol}"
        return f"{base}@{self.observer}" if self.observer else base


def flow_key(rec: PacketRecord) -> FlowKey:
    """Direction-independent key; WSMP has no ports so it keys on the address pair."""
    if rec.protocol == "WSMP":
        a, b = (rec.src_addr, 0), (rec.dst_addr, 0)
    else:
        a, b = (rec.src_addr, rec.src_port), (rec.dst_addr, rec.dst_port)
    if b < a:
        a, b = b, a
    return FlowKey(a[0], a[1], b[0], b[1], rec.protocol, rec.observer or "")


# --------------------------------------------------------------------------
# Accumulators


class _Stats:
    """Exact integer moments of a sample."""

    __slots__ = ("n", "total", "sq", "lo", "hi")

    def __init__(self) -> None:
        self.n = 0
        self.total = 0
        self.sq = 0
        self.lo = 0
        self.hi = 0

    def add(self, x: int) -> None:
        if self.n == 0 or x < self.lo:
            self.lo = x
        if self.n == 0 or x > self.hi:
            self.hi = x
        self.n += 1
        self.total += x
        self.sq += x * x

    def mean(self) -> float:
        return self.total / self.n if self.n else 0.0

    def std(self) -> float:
        if self.n < 2:
            return 0.0
        num = self.n * self.sq - self.total * self.total  # n^2 * variance, exact
        return math.sqrt(num) / self.n if num > 0 else 0.0

    def summary(self) -> tuple[float, float, float, float]:
        """(mean, std, max, min); zeros when empty."""
        if self.n == 0:
            return 0.0, 0.0, 0.0, 0.0
        return self.mean(), self.std(), float(self.hi), float(self.lo)


class _Direction:
    __slots__ = ("lengths", "iat", "last_us", "header", "init_win", "psh", "urg",
                 "bulk_count", "bulk_pkts", "bulk_bytes", "bulk_us")

    def __init__(self) -> None:
        self.lengths = _Stats()
        self.iat = _Stats()
        self.last_us = -1
        self.header = 0
        self.init_win = 0
        self.psh = 0
        self.urg = 0
        self.bulk_count = 0
        self.bulk_pkts = 0
        self.bulk_bytes = 0
        self.bulk_us = 0


class FlowState:
    """Open or closed flow with all raw accumulators needed for featurization."""

    __slots__ = ("key", "seq", "src", "src_port", "dst", "dst_port", "first_us", "last_us",
                 "fwd", "bwd", "iat", "flags", "fwd_act_data", "fwd_seg_min",
                 "activity_timeout_us", "active_start_us", "active", "idle", "subflows",
                 "run_dir", "run_start_us", "run_last_us", "run_pkts", "run_bytes",
                 "labels", "closed", "close_reason")

    def __init__(self, key: FlowKey, first: PacketRecord, seq: int = 0, activity_timeout_s: float = 5.0):
        self.key = key
        self.seq = seq
        self.src, self.src_port = first.src_addr, first.src_port
        self.dst, self.dst_port = first.dst_addr, first.dst_port
        self.first_us = to_us(first.timestamp)
        self.last_us = self.first_us
        self.fwd = _Direction()
        self.bwd = _Direction()
        self.iat = _Stats()
        self.flags = dict.fromkeys(TCP_FLAGS, 0)
        self.fwd_act_data = 0
        self.fwd_seg_min = 0
        self.activity_timeout_us = to_us(activity_timeout_s)
        self.active_start_us = self.first_us
        self.active = _Stats()
        self.idle = _Stats()
        self.subflows = 1
        self.run_dir: _Direction | None = None
        self.run_start_us = self.run_last_us = 0
        self.run_pkts = self.run_bytes = 0
        self.labels: set[str] = set()
        self.closed = False
        self.close_reason = ""

    def is_forward(self, rec: PacketRecord) -> bool:
        if rec.protocol == "WSMP":
            return rec.src_addr == self.src
        return rec.src_addr == self.src and rec.src_port == self.src_port

    def add(self, rec: PacketRecord) -> None:
        ts = to_us(rec.timestamp)
        fwd = self.is_forward(rec)
        d = self.fwd if fwd else self.bwd
        if d.lengths.n == 0:
            d.init_win = rec.init_window
            if fwd:
                self.fwd_seg_min = rec.header_len
        if self.fwd.lengths.n + self.bwd.lengths.n > 0:  # the first packet has no gap
            gap = ts - self.last_us
            self.iat.add(gap)
            if gap > self.activity_timeout_us:
                self.active.add(self.last_us - self.active_start_us)
                self.idle.add(gap)
                self.active_start_us = ts
            if gap > SUBFLOW_GAP_US:
                self.subflows += 1
        if d.last_us >= 0:
            d.iat.add(ts - d.last_us)
        d.last_us = ts
        self.last_us = ts

        plen = rec.payload_len
        d.lengths.add(plen)
        d.header += rec.header_len
        if fwd:
            if plen >= 1:
                self.fwd_act_data += 1
            if rec.header_len < self.fwd_seg_min:
                self.fwd_seg_min = rec.header_len
        for f in rec.tcp_flags:
            self.flags[f] += 1
            if f == "PSH":
                d.psh += 1
            elif f == "URG":
                d.urg += 1
        if plen > 0:
            self._bulk_step(d, ts, plen)
        tag = rec.app_tag
        if tag in ATTACK_TAGS:
            self.labels.add(tag)

    def _bulk_step(self, d: _Direction, ts: int, plen: int) -> None:
        if self.run_dir is d and ts - self.run_last_us <= BULK_GAP_US:
            self.run_pkts += 1
            self.run_bytes += plen
            self.run_last_us = ts
            return
        self._close_run()
        self.run_dir = d
        self.run_start_us = self.run_last_us = ts
        self.run_pkts = 1
        self.run_bytes = plen

    def _close_run(self) -> None:
        d = self.run_dir
        if d is not None and self.run_pkts >= BULK_MIN_PKTS:
            d.bulk_count += 1
            d.bulk_pkts += self.run_pkts
            d.bulk_bytes += self.run_bytes
            d.bulk_us += self.run_last_us - self.run_start_us
        self.run_dir = None
        self.run_pkts = self.run_bytes = 0

    def close(self, reason: str = "end") -> None:
        if self.closed:
            return
        self._close_run()
        self.active.add(self.last_us - self.active_start_us)
        self.closed = True
        self.close_reason = reason

    @property
    def packet_count(self) -> int:
        return self.fwd.lengths.n + self.bwd.lengths.n

    @property
    def label(self) -> str:
        """Attack tag carried by any packet, else benign-wsmp / benign-ip."""
        if self.labels:
            return min(self.labels, key=ATTACK_TAGS.index)
        return "benign-wsmp" if self.key.protocol == "WSMP" else "benign-ip"

    @property
    def degenerate(self) -> bool:
        return self.last_us == self.first_us


# --------------------------------------------------------------------------
# Assembly


def assemble(trace: TraceFile | Iterable[PacketRecord], timeout_s: float = 600.0,
             activity_timeout_s: float = 5.0) -> list[FlowState]:
    """Group packets into bidirectional flows; returns closed flows in creation order.

    A flow closes on a TCP FIN (the FIN packet belongs to it) or when a packet
    for its key arrives more than ``timeout_s`` after the flow's last packet;
    that late packet opens a new flow.
    """
    records = trace.records if isinstance(trace, TraceFile) else trace
    timeout_us = to_us(timeout_s)
    open_flows: dict[FlowKey, FlowState] = {}
    done: list[FlowState] = []
    seq = 0
    prev = -1
    for i, rec in enumerate(records):
        ts = to_us(rec.timestamp)
        if ts < prev:
            raise TraceOrderError(i)
        prev = ts
        key = flow_key(rec)
        st = open_flows.get(key)
        if st is not None and ts - st.last_us > timeout_us:
            st.close("timeout")
            done.append(st)
            st = None
        if st is None:
            st = FlowState(key, rec, seq, activity_timeout_s)
            seq += 1
            open_flows[key] = st
        st.add(rec)
        if rec.protocol == "TCP" and "FIN" in rec.tcp_flags:
            st.close("fin")
            done.append(st)
            del open_flows[key]
    for st in open_flows.values():
        st.close("end")
        done.append(st)
    done.sort(key=lambda s: s.seq)
    return done


# --------------------------------------------------------------------------
# Features


def _rate(count: float, seconds: float) -> float:
    return count / seconds if seconds > 0 else 0.0


def featurize(state: FlowState) -> dict[str, float]:
    """The named feature vector of a closed flow (times in microseconds)."""
    if not state.closed:
        raise ValueError("featurize needs a closed flow")
    fwd, bwd = state.fwd, state.bwd
    nf, nb = fwd.lengths.n, bwd.lengths.n
    n = nf + nb
    bf, bb = fwd.lengths.total, bwd.lengths.total
    dur_us = state.last_us - state.first_us
    secs = dur_us / US

    all_len = _Stats()
    all_len.n = n
    all_len.total = bf + bb
    all_len.sq = fwd.lengths.sq + bwd.lengths.sq
    lens = [s for s in (fwd.lengths, bwd.lengths) if s.n]
    all_len.lo = min(s.lo for s in lens)
    all_len.hi = max(s.hi for s in lens)

    f_mean, f_std, f_max, f_min = fwd.lengths.summary()
    b_mean, b_std, b_max, b_min = bwd.lengths.summary()
    i_mean, i_std, i_max, i_min = state.iat.summary()
    fi_mean, fi_std, fi_max, fi_min = fwd.iat.summary()
    bi_mean, bi_std, bi_max, bi_min = bwd.iat.summary()
    p_mean, p_std, p_max, p_min = all_len.summary()
    a_mean, a_std, a_max, a_min = state.active.summary()
    d_mean, d_std, d_max, d_min = state.idle.summary()

    def bulk(d: _Direction) -> tuple[float, float, float]:
        if d.bulk_count == 0:
            return 0.0, 0.0, 0.0
        return d.bulk_bytes / d.bulk_count, d.bulk_pkts / d.bulk_count, _rate(d.bulk_bytes, d.bulk_us / US)

    fb = bulk(fwd)
    bbk = bulk(bwd)
    sf = state.subflows
    fl = state.flags
    values = (
        float(dur_us),
        float(nf), float(nb),
        float(bf), float(bb),
        f_max, f_min, f_mean, f_std,
        b_max, b_min, b_mean, b_std,
        _rate(bf + bb, secs), _rate(n, secs),
        i_mean, i_std, i_max, i_min,
        float(fwd.iat.total), fi_mean, fi_std, fi_max, fi_min,
        float(bwd.iat.total), bi_mean, bi_std, bi_max, bi_min,
        float(fwd.psh), float(bwd.psh), float(fwd.urg), float(bwd.urg),
        float(fwd.header), float(bwd.header),
        _rate(nf, secs), _rate(nb, secs),
        p_min, p_max, p_mean, p_std,
        *(float(fl[f]) for f in TCP_FLAGS),
        float(nb // nf),
        (bf + bb) / n, bf / nf, bb / nb if nb else 0.0,
        fb[0], fb[1], fb[2],
        bbk[0], bbk[1], bbk[2],
        nf / sf, bf / sf, nb / sf, bb / sf,
        float(fwd.init_win), float(bwd.init_win),
        float(state.fwd_act_data), float(state.fwd_seg_min),
        a_mean, a_std, a_max, a_min,
        d_mean, d_std, d_max, d_min,
    )
    return dict(zip(FEATURE_NAMES, values))


def flow_identity(state: FlowState) -> dict[str, object]:
    return {
        "Flow ID": str(state.key),
        "Src": state.src,
        "Src Port": state.src_port,
        "Dst": state.dst,
        "Dst Port": state.dst_port,
        "Protocol": state.key.protocol,
        "Observer": state.key.observer,
        "Timestamp": state.first_us / US,
        "Degenerate": int(state.degenerate),
    }


# --------------------------------------------------------------------------
# Flow tables


@dataclass
class FlowTable:
    """Feature matrix plus identity columns and labels, as read from flows.csv."""

    feature_names: list[str]
    X: np.ndarray
    labels: list[str]
    ids: list[dict[str, str]]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, rows: Sequence[int]) -> "FlowTable":
        rows = list(rows)
        return FlowTable(self.feature_names, self.X[rows], [self.labels[i] for i in rows],
                         [self.ids[i] for i in rows])

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]


def flows_to_table(flows: Sequence[FlowState]) -> FlowTable:
    X = np.array([[featurize(f)[n] for n in FEATURE_NAMES] for f in flows], dtype=float).reshape(
        len(flows), len(FEATURE_NAMES))
    ids = [{k: str(v) for k, v in flow_identity(f).items()} for f in flows]
    return FlowTable(list(FEATURE_NAMES), X, [f.label for f in flows], ids)


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def write_flows_csv(table: FlowTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ID_COLUMNS, *table.feature_names, LABEL_COLUMN])
        for ident, row, label in zip(table.ids, table.X.tolist(), table.labels):
            w.writerow([*(ident.get(c, "") for c in ID_COLUMNS), *(_fmt(v) for v in row), label])


def read_flows_csv(path: str | Path) -> FlowTable:
    """Read a flows.csv; blank or non-numeric feature cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty flow table")
    header = rows[0]
    if LABEL_COLUMN not in header:
        raise TraceFormatError(f"{path}: missing {LABEL_COLUMN!r} column")
    id_idx = [i for i, h in enumerate(header) if h in ID_COLUMNS]
    label_idx = header.index(LABEL_COLUMN)
    feat_idx = [i for i, h in enumerate(header) if h not in ID_COLUMNS and i != label_idx]
    names = [header[i] for i in feat_idx]
    X = np.full((len(rows) - 1, len(feat_idx)), np.nan)
    labels, ids = [], []
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise TraceFormatError(f"{path}: line {r + 2} has {len(row)} cells, expected {len(header)}")
        for c, i in enumerate(feat_idx):
            try:
                X[r, c] = float(row[i]) if row[i] != "" else np.nan
            except ValueError:
                X[r, c] = np.nan
        labels.append(row[label_idx])
        ids.append({header[i]: row[i] for i in id_idx})
    return FlowTable(names, X, labels, ids)
