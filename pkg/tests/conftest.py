from __future__ import annotations

import pytest

from vbotdetect.capture import PacketRecord
from vbotdetect.experiment import bundled_experiment, run_experiment


def to_record(p: dict) -> PacketRecord:
    return PacketRecord(
        timestamp=p["ts_us"] / 1e6, src_addr=p["src"], dst_addr=p["dst"], src_port=p["sport"],
        dst_port=p["dport"], protocol=p["proto"], total_len=p["hlen"] + p["plen"], header_len=p["hlen"],
        payload_len=p["plen"], tcp_flags=tuple(p["flags"]), init_window=p["win"], app_tag=p.get("app", ""),
    )


def pkt(ts: float, src="a", dst="b", sport=1000, dport=80, proto="UDP", plen=100, hlen=48, flags=(), **kw):
    return PacketRecord(ts, src, dst, sport, dport, proto, hlen + plen, hlen, plen, tuple(flags), **kw)


_NETWORK_RUNS: dict[int, object] = {}


@pytest.fixture(scope="session")
def network_run():
    """paper-network experiment results, computed once per seed."""
    def get(seed: int):
        if seed not in _NETWORK_RUNS:
            _NETWORK_RUNS[seed] = run_experiment(bundled_experiment("paper-network", seed))
        return _NETWORK_RUNS[seed]
    return get


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the run summary."""
    def record(number: int, ok: bool | None, detail: str) -> None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[criterion {number}] {status}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
