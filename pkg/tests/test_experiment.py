import pytest

from vbotdetect.errors import StageError
from vbotdetect.experiment import (
    ExperimentConfig,
    bundled_experiment,
    render_markdown,
    run_experiment,
    scenario_seed,
    write_reports,
)


def test_network_table_rows(network_run):
    res = network_run(0)
    md = render_markdown(res)
    for row in ("WSMP Traffic", "IP Traffic", "GPS Tracking", "Phishing", "WSMP Flood", "GeoFlood", "Average Value"):
        assert f"| {row} |" in md
    assert res.multiclass.classes == ["benign-wsmp", "benign-ip", "gps-tracking", "phishing", "wsmp-flood",
                                      "geo-wsmp-flood"]


def test_split_proportion(network_run):
    res = network_run(0)
    s = res.schemes["multiclass"]
    assert sum(s.train_counts.values()) == round(0.6 * res.rows)


@pytest.fixture(scope="module")
def can_result():
    return run_experiment(bundled_experiment("paper-can", 0))


def test_can_table_rows(can_result):
    md = render_markdown(can_result)
    for row in ("Benign", "DoS Attack", "Fuzzy Attack", "Gear Attack", "RPM Attack"):
        assert f"| {row} |" in md


def test_reports_are_reproducible(tmp_path, can_result):
    write_reports(can_result, tmp_path / "a")
    write_reports(run_experiment(bundled_experiment("paper-can", 0)), tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "report.md" in names and "summary.json" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n


def test_scenario_seeds_differ():
    assert scenario_seed(0, "benign-beacon") != scenario_seed(0, "benign-safety-event")
    assert scenario_seed(0, "benign-beacon") != scenario_seed(1, "benign-beacon")


def test_stage_errors_name_the_stage():
    cfg = ExperimentConfig("broken", "network", scenarios=["no-such-scenario"])
    with pytest.raises(StageError) as exc:
        run_experiment(cfg)
    assert exc.value.stage == "gen"


def test_selection_runs_on_small_experiment():
    cfg = ExperimentConfig("small", "can", cv_folds=3, select_features=True, model="nb")
    res = run_experiment(cfg)
    assert res.selected and len(res.selected) < 11
    assert res.feature_names == res.selected
