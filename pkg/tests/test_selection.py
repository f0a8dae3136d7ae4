import numpy as np
import pytest

from vbotdetect.errors import SelectionError
from vbotdetect.learn import Dataset, make_trainer
from vbotdetect.selection import select_forward

tree = make_trainer("tree")


def test_single_separating_feature():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 40)
    X = np.column_stack([rng.normal(size=80), y + 0.1 * rng.random(80), rng.normal(size=80)])
    data = Dataset(X, y, ["n1", "sep", "n2"], ["a", "b"])
    res = select_forward(data, tree, k=5)
    assert res.names == ["sep"]
    assert res.score == 1.0


def test_duplicate_columns_lower_index_wins():
    rng = np.random.default_rng(1)
    y = np.repeat([0, 1], 30)
    col = y + 0.05 * rng.random(60)
    data = Dataset(np.column_stack([rng.normal(size=60), col, col]), y, ["n", "first", "copy"], ["a", "b"])
    res = select_forward(data, tree, k=5)
    assert "first" in res.names and "copy" not in res.names


def test_history_strictly_improves():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(120, 6))
    y = ((X[:, 0] > 0) ^ (X[:, 3] > 0.5)).astype(int)
    res = select_forward(Dataset(X, y, [f"f{i}" for i in range(6)], ["a", "b"]), tree, k=5)
    scores = [s for _, s in res.history]
    assert all(b > a for a, b in zip(scores, scores[1:]))


def test_needs_two_features_and_classes():
    with pytest.raises(SelectionError):
        select_forward(Dataset(np.zeros((10, 1)), np.repeat([0, 1], 5), ["a"], ["x", "y"]), tree)
    with pytest.raises(SelectionError):
        select_forward(Dataset(np.zeros((10, 2)), np.zeros(10, int), ["a", "b"], ["x"]), tree)
