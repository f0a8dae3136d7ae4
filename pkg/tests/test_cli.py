import json

import pytest

from vbotdetect.cli import main
from vbotdetect.learn import load_model


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_full_chain(workdir):
    assert main(["gen", "--scenario", "attack-gps-tracking", "--seed", "2", "--out", "t.jsonl"]) == 0
    assert main(["meter", "--in", "t.jsonl", "--out", "flows.csv"]) == 0
    assert (workdir / "flows.scale.json").is_file()
    assert main(["train", "--model", "tree", "--in", "flows.csv", "--out", "m1.json", "--cv", "3"]) == 0
    assert load_model("m1.json").scaler is not None
    assert main(["gen", "--scenario", "can-attacks", "--seed", "1", "--out", "c.csv"]) == 0
    assert main(["canscan", "--in", "c.csv", "--out", "canfeat.csv"]) == 0
    assert main(["train", "--model", "nb", "--in", "canfeat.csv", "--out", "m2.json"]) == 0
    (workdir / "policy.json").write_text(json.dumps({"approval_script": ["deny"]}))
    args = ["detect", "--trace", "t.jsonl", "--can", "c.csv", "--net-model", "m1.json", "--can-model", "m2.json",
            "--policy", "policy.json"]
    assert main(args + ["--audit", "a.log"]) == 0
    assert main(args + ["--audit", "b.log"]) == 0
    assert (workdir / "a.log").read_bytes() == (workdir / "b.log").read_bytes()
    events = [json.loads(line) for line in (workdir / "a.log").read_text().splitlines()]
    assert events[0]["schema"] == "vbotdetect.audit/1"
    assert any(e.get("kind") == "BlockDestination" for e in events)


def test_gen_is_deterministic(workdir):
    for out in ("a.jsonl", "b.jsonl"):
        main(["gen", "--scenario", "benign-convenience-event", "--seed", "4", "--out", out])
    assert (workdir / "a.jsonl").read_bytes() == (workdir / "b.jsonl").read_bytes()


def test_gen_from_config(workdir):
    cfg = {"duration_s": 5.0, "node_count": 3, "app_mix": [{"app_id": "BSM"}]}
    (workdir / "s.json").write_text(json.dumps(cfg))
    assert main(["gen", "--scenario", "s.json", "--seed", "1", "--out", "t.jsonl"]) == 0
    can = {"kind": "can", "duration_s": 1.0, "attacks": [{"label": "dos", "start_s": 0.2, "duration_s": 0.1,
                                                          "rate_hz": 100}]}
    (workdir / "c.json").write_text(json.dumps(can))
    assert main(["gen", "--scenario", "c.json", "--out", "c.csv"]) == 0
    assert "dos" in (workdir / "c.csv").read_text()


def test_errors_exit_nonzero(workdir, capsys):
    assert main(["gen", "--scenario", "no-such-scenario", "--out", "x.jsonl"]) == 2
    assert "unknown scenario" in capsys.readouterr().err
    assert main(["meter", "--in", "missing.jsonl", "--out", "f.csv"]) == 2


def test_eval_assert_passes(workdir):
    assert main(["eval", "--experiment", "paper-can", "--seed", "0", "--out", "rep", "--assert"]) == 0
    assert (workdir / "rep" / "report.md").is_file()


def test_eval_assert_fails_on_missed_threshold(workdir):
    cfg = {"name": "strict-can", "kind": "can", "thresholds": {"accuracy_min": 1.01}}
    (workdir / "e.json").write_text(json.dumps(cfg))
    assert main(["eval", "--experiment", "e.json", "--out", "rep"]) == 0
    assert main(["eval", "--experiment", "e.json", "--out", "rep", "--assert"]) == 1
