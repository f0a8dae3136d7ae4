import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbotdetect.capture import (
    CCH,
    DSRC_CHANNELS,
    CanRecord,
    TraceFile,
    WsmFrame,
    decode_wsm,
    dumps_trace,
    encode_wsm,
    read_trace,
    write_trace,
)
from vbotdetect.errors import LengthMismatchError, MalformedFrameError, TraceFormatError, TraceOrderError
from vbotdetect.flowmeter import assemble

from conftest import pkt

frames = st.builds(
    WsmFrame,
    wsmp_version=st.integers(0, 255),
    psid=st.integers(0, 2**32 - 1),
    channel_number=st.sampled_from(sorted(DSRC_CHANNELS)),
    data_rate=st.integers(0, 255),
    wave_element_id=st.integers(0, 255),
    payload=st.binary(max_size=300),
)


@given(frames)
def test_wsm_roundtrip(frame):
    assert decode_wsm(encode_wsm(frame)) == frame


def test_empty_wsm_is_ten_bytes():
    assert len(encode_wsm(WsmFrame(3, 0x20, CCH, 6, 0x80))) == 10


def test_psid_big_endian():
    raw = encode_wsm(WsmFrame(3, 0x20, CCH, 6, 0x80, b"x"))
    assert raw[1:5] == bytes([0, 0, 0, 0x20])


def test_short_frame_rejected():
    with pytest.raises(MalformedFrameError):
        decode_wsm(bytes(9))


def test_declared_length_mismatch():
    header = encode_wsm(WsmFrame(3, 0x20, CCH, 6, 0x80, bytes(100)))[:10]
    with pytest.raises(LengthMismatchError):
        decode_wsm(header + bytes(50))


def test_non_dsrc_channel_rejected():
    with pytest.raises(MalformedFrameError):
        WsmFrame(3, 0x20, 100, 6, 0x80)


def test_network_trace_roundtrip(tmp_path):
    recs = [pkt(0.5, proto="WSMP", sport=0, dport=0, psid=0x20, channel=CCH, app_tag="bsm"),
            pkt(1.25, proto="TCP", flags=("SYN",), init_window=65535),
            pkt(2.0, geo_scope="area-1", observer="node3")]
    trace = TraceFile("network", recs, {"scenario": "t"})
    path = tmp_path / "t.jsonl"
    write_trace(trace, path)
    back = read_trace(path, "network")
    assert back.records == recs
    assert back.meta == {"scenario": "t"}


def test_empty_trace_is_header_only(tmp_path):
    text = dumps_trace(TraceFile("network", []))
    assert text.count("\n") == 1
    path = tmp_path / "e.jsonl"
    path.write_text(text)
    assert read_trace(path, "network").records == []


def test_writes_are_deterministic(tmp_path):
    trace = TraceFile("network", [pkt(0.0), pkt(1.0)])
    write_trace(trace, tmp_path / "a")
    write_trace(trace, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_unsorted_trace_rejected(tmp_path):
    with pytest.raises(TraceOrderError):
        dumps_trace(TraceFile("network", [pkt(2.0), pkt(1.0)]))
    with pytest.raises(TraceOrderError):
        assemble([pkt(2.0), pkt(1.0)])


def test_unknown_schema_rejected(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"schema":"other/9","kind":"network"}\n')
    with pytest.raises(TraceFormatError):
        read_trace(p, "network")


def test_can_trace_roundtrip(tmp_path):
    recs = [CanRecord(0.001, 0x316, 8, (5, 6, 7, 8, 9, 10, 11, 12)),
            CanRecord(0.002, 0x000, 2, (0x11, 0x22), "dos")]
    path = tmp_path / "c.csv"
    write_trace(TraceFile("can", recs), path)
    back = read_trace(path, "can")
    assert back.records == recs
    assert back.records[1].data == (0x11, 0x22, None, None, None, None, None, None)


def test_public_can_rows(tmp_path):
    path = tmp_path / "DoS_dataset.csv"
    path.write_text("1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R\n"
                    "1478198376.389636,0000,8,00,00,00,00,00,00,00,00,T\n"
                    "1478198376.389700,018f,2,fe,5b,R\n")
    trace = read_trace(path, "can")
    assert [r.label for r in trace.records] == ["benign", "dos", "benign"]
    assert trace.records[2].dlc == 2 and trace.records[2].data[2:] == (None,) * 6


def test_can_record_limits():
    with pytest.raises(TraceFormatError):
        CanRecord(0.0, 0x800, 8, ())
    with pytest.raises(TraceFormatError):
        CanRecord(0.0, 0x10, 9, ())
