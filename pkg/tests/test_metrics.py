import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbotdetect.errors import EmptyDatasetError
from vbotdetect.metrics import collapse, compute_metrics, split

from oracles import metrics_reference


def test_worked_example():
    labels = ["pos"] * 55 + ["neg"] * 45
    preds = ["pos"] * 50 + ["neg"] * 5 + ["pos"] * 5 + ["neg"] * 40
    r = compute_metrics(preds, labels, ["pos", "neg"]).row("pos")
    assert (r.tp, r.fp, r.tn, r.fn) == (50, 5, 40, 5)
    assert r.accuracy == pytest.approx(0.90)
    assert r.precision == pytest.approx(50 / 55)
    assert r.recall == pytest.approx(50 / 55)
    assert r.fpr == pytest.approx(5 / 45)
    assert r.fnr == pytest.approx(5 / 55)


def test_perfect_predictions():
    y = list("abcabc")
    rep = compute_metrics(y, y)
    for r in rep.per_class:
        assert r.accuracy == r.precision == r.recall == r.f1 == 1.0
        assert r.fpr == r.fnr == 0.0
    assert rep.accuracy == 1.0


def test_zero_denominators_flagged():
    rep = compute_metrics(["a", "a"], ["a", "a"], ["a", "b"])
    b = rep.row("b")
    assert b.precision == b.recall == 0.0
    assert any("precision" in f for f in b.flags) and any("recall" in f for f in b.flags)


def test_macro_is_unweighted_mean():
    rep = compute_metrics(list("aab"), list("abb"))
    assert rep.macro["recall"] == pytest.approx((1.0 + 0.5) / 2)


def test_empty_rejected():
    with pytest.raises(EmptyDatasetError):
        compute_metrics([], [])


@given(st.integers(0, 2**31))
def test_against_counting_oracle(seed):
    rng = random.Random(seed)
    classes = ["a", "b", "c"]
    n = rng.randint(1, 300)
    labels = [rng.choice(classes) for _ in range(n)]
    preds = [rng.choice(classes) for _ in range(n)]
    rep = compute_metrics(preds, labels, classes)
    ref, overall = metrics_reference(preds, labels, classes)
    assert Fraction(rep.accuracy) == Fraction(float(overall))
    for r in rep.per_class:
        want = ref[r.label]
        assert (r.tp, r.fp, r.tn, r.fn) == (want["tp"], want["fp"], want["tn"], want["fn"])
        for k in ("accuracy", "precision", "recall", "f1", "fpr", "fnr"):
            assert getattr(r, k) == float(want[k]), k


def test_collapse():
    assert collapse(["benign-ip", "phishing", "benign-wsmp"], ["benign-ip", "benign-wsmp"]) == [
        "benign", "malicious", "benign"]


def test_split_sizes():
    labels = ["a"] * 70 + ["b"] * 30
    train, test = split(labels, 0.6, seed=1)
    assert len(train) == 60 and len(test) == 40
    assert sum(labels[i] == "b" for i in train) == 18


def test_split_partition_and_determinism():
    labels = [random.Random(4).choice("xyz") for _ in range(97)]
    tr, te = split(labels, 0.6, 5)
    assert not set(tr) & set(te) and sorted(np.concatenate([tr, te]).tolist()) == list(range(97))
    tr2, te2 = split(labels, 0.6, 5)
    assert tr.tolist() == tr2.tolist() and te.tolist() == te2.tolist()
