import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbotdetect.errors import InferenceError, TrainingError
from vbotdetect.learn import (
    Dataset,
    StratificationWarning,
    TreeParams,
    entropy,
    kfold_cv,
    kfold_indices,
    load_model,
    majority_vote,
    make_trainer,
    predict,
    predict_knn,
    predict_nb,
    save_model,
    train_forest,
    train_knn,
    train_nb,
    train_tree,
)
from vbotdetect.learn.base import Model

from oracles import entropy_direct

UNLIMITED = TreeParams(min_gain=0.0)


def ds(X, y, classes=None):
    return Dataset.from_labels(np.asarray(X, dtype=float), y, classes=classes)


# -- entropy ----------------------------------------------------------------


def test_entropy_examples():
    assert entropy([8, 8]) == 1.0
    assert entropy([10, 0]) == 0.0
    assert entropy([9, 5]) == pytest.approx(0.940286, abs=5e-7)


def test_entropy_empty_is_error():
    with pytest.raises(ValueError):
        entropy([0, 0])


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=8).filter(lambda c: sum(c) > 0))
def test_entropy_matches_direct(counts):
    assert entropy(counts) == pytest.approx(entropy_direct(counts), abs=1e-12)


# -- tree -------------------------------------------------------------------


def test_tree_1d_separable():
    m = train_tree(ds([[1], [2], [3], [10], [11], [12]], list("aaabbb")))
    assert m.depth() == 1
    assert m.predict_labels(np.array([[1], [2], [3], [10], [11], [12]], float)) == list("aaabbb")
    assert m.threshold[0] == 6.5


def test_tree_pure_is_leaf():
    m = train_tree(ds([[1], [2], [3]], ["x"] * 3))
    assert m.node_count == 1


XOR_X = [[0, 0], [0, 1], [1, 0], [1, 1]]
XOR_Y = ["a", "b", "b", "a"]


def test_xor_has_no_depth_one_solution():
    # exhaustive: every feature, every midpoint, every leaf labelling
    for f in range(2):
        for thr in (0.5,):
            for left, right in itertools.product("ab", repeat=2):
                pred = [left if x[f] < thr else right for x in XOR_X]
                assert pred != XOR_Y


def test_xor_tree():
    m = train_tree(ds(XOR_X, XOR_Y), UNLIMITED)
    assert m.depth() >= 2
    assert m.predict_labels(np.array(XOR_X, float)) == XOR_Y


def test_threshold_tie_goes_right():
    m = train_tree(ds([[0], [2]], ["a", "b"]))
    assert m.threshold[0] == 1.0
    assert predict(m, [1.0])[0] == "b"
    assert predict(m, [0.999])[0] == "a"


def test_leaf_distribution_sums_to_one():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    y = rng.choice(list("abc"), 60)
    m = train_tree(ds(X, y), TreeParams(max_depth=2))
    for row in X[:10]:
        _, dist = predict(m, row)
        assert sum(dist.values()) == pytest.approx(1.0)


def test_leaf_tie_goes_to_lowest_class():
    m = train_tree(ds([[1], [1]], ["b", "a"]))
    assert predict(m, [1])[0] == "a"


def test_predict_missing_feature():
    data = Dataset.from_labels(np.array([[0.0, 1], [1, 1]]), ["a", "b"], ["x", "y"])
    m = train_tree(data)
    assert predict(m, {"x": 1.0})[0] == "b"
    with pytest.raises(InferenceError):
        predict(m, {"y": 1.0})


def test_empty_dataset_rejected():
    with pytest.raises(TrainingError):
        train_tree(Dataset(np.zeros((0, 2)), np.zeros(0, int), ["a", "b"], ["x"]))


@given(st.integers(0, 10_000))
def test_unrestricted_tree_memorizes(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 80))
    X = rng.integers(0, 5, size=(n, 3)).astype(float)
    _, first = np.unique(X, axis=0, return_index=True)
    X = X[np.sort(first)]
    y = rng.choice(list("abc"), len(X))
    m = train_tree(ds(X, y), UNLIMITED)
    assert m.predict_labels(X) == list(y)


# -- naive Bayes --------------------------------------------------------------


def test_nb_symmetric_tie():
    m = train_nb(ds([[-1], [-3], [1], [3]], ["a", "a", "b", "b"]))
    assert predict_nb(m, [0.0]) == "a"


def test_nb_priors():
    m = train_nb(ds(np.arange(40).reshape(-1, 1), ["a"] * 30 + ["b"] * 10))
    assert m.priors.tolist() == [0.75, 0.25]


def test_nb_posterior_ranking_matches_product():
    X = [[1.0, 5.0], [2.0, 4.0], [6.0, 1.0], [7.0, 3.0]]
    y = ["a", "a", "b", "b"]
    m = train_nb(ds(X, y))
    q = [3.0, 3.5]

    def product(c):
        rows = [x for x, l in zip(X, y) if l == c]
        p = len(rows) / len(X)
        for i in range(2):
            col = [r[i] for r in rows]
            mu, var = statistics.fmean(col), max(statistics.pvariance(col), 1e-9)
            p *= math.exp(-((q[i] - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
        return p

    ref = sorted("ab", key=product, reverse=True)
    lp = m.log_posterior(np.array([q]))[0]
    assert [m.classes[i] for i in np.argsort(-lp)] == ref
    assert lp[0] - lp[1] == pytest.approx(math.log(product("a") / product("b")))


def test_nb_needs_rows_per_class():
    with pytest.raises(TrainingError):
        train_nb(Dataset.from_labels(np.array([[1.0]]), ["a"], classes=["a", "b"]))


# -- kNN ----------------------------------------------------------------------


def test_knn_exact_match():
    m = train_knn(ds([[0, 0], [5, 5], [9, 9]], ["a", "b", "c"]), k=1)
    assert predict_knn(m, [5, 5]) == "b"


def test_knn_all_rows_matches_score_oracle():
    X = [[0, 0], [1, 0], [10, 10], [11, 10]]
    y = ["a", "a", "b", "b"]
    m = train_knn(ds(X, y), k=4)
    q = [40.0, 3.0]
    score = {c: sum(1 / (1 + math.dist(q, x)) for x, l in zip(X, y) if l == c) for c in "ab"}
    np.testing.assert_allclose(m.scores(np.array([q]))[0], [score["a"], score["b"]], rtol=1e-12)
    assert predict_knn(m, q) == max("ab", key=score.get)


def test_knn_conflicting_duplicates():
    m = train_knn(ds([[1, 1], [1, 1]], ["b", "a"]), k=2)
    assert predict_knn(m, [1, 1]) == "a"


def test_knn_k_bounds():
    with pytest.raises(TrainingError):
        train_knn(ds([[0], [1]], ["a", "b"]), k=3)


# -- forest and voting --------------------------------------------------------


def _blobs(seed=0, n=60):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n, 4)), rng.normal(2, 1, (n, 4))])
    return ds(X, ["a"] * n + ["b"] * n)


def test_degenerate_forest_is_a_tree():
    data = _blobs()
    forest = train_forest(data, n_trees=1, feat_frac=1.0, bootstrap=False)
    tree = train_tree(data)
    assert forest.predict_labels(data.X) == tree.predict_labels(data.X)


def test_forest_unanimity_and_determinism():
    data = _blobs(1)
    a = train_forest(data, n_trees=7, seed=3)
    b = train_forest(data, n_trees=7, seed=3)
    assert a.to_json() == b.to_json()
    far = np.array([[-20.0] * 4])
    assert a.votes(far)[0].tolist() == [7, 0]


def test_majority_vote():
    assert majority_vote(["a", "a", "b"]) == "a"
    assert majority_vote(["c", "b", "a"], ["a", "b", "c"]) == "a"
    assert majority_vote(["z"]) == "z"


# -- cross-validation ---------------------------------------------------------


class _Memorizer(Model):
    """Returns the stored label for seen rows and a fixed wrong class otherwise."""

    kind = "memo"

    def __init__(self, data):
        self.feature_names, self.classes = data.feature_names, data.classes
        self.table = {tuple(r): c for r, c in zip(data.X.tolist(), data.y.tolist())}

    def predict_index(self, X):
        return np.array([self.table.get(tuple(r), -1) for r in np.asarray(X).tolist()])


def test_cv_scores_on_held_out_rows():
    data = _blobs(2, 20)
    res = kfold_cv(data, _Memorizer, k=5, seed=1)
    assert res.scores == [0.0] * 5
    allrows = np.concatenate(res.folds)
    assert sorted(allrows.tolist()) == list(range(len(data)))


def test_cv_leave_one_out():
    data = _blobs(3, 5)
    with pytest.warns(StratificationWarning):
        folds = kfold_indices(data.y, len(data), 0)
    assert all(len(f) == 1 for f in folds)


def test_cv_folds_deterministic():
    y = _blobs(4).y
    assert [f.tolist() for f in kfold_indices(y, 10, 9)] == [f.tolist() for f in kfold_indices(y, 10, 9)]


def test_cv_stratification():
    y = np.array([0] * 50 + [1] * 30)
    for f in kfold_indices(y, 10, 0):
        assert (y[f] == 0).sum() == 5 and (y[f] == 1).sum() == 3


def test_cv_small_class_warns():
    y = np.array([0] * 20 + [1] * 3)
    with pytest.warns(StratificationWarning):
        folds = kfold_indices(y, 5, 0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))


# -- persistence --------------------------------------------------------------


@pytest.mark.parametrize("kind", ["tree", "nb", "knn", "forest"])
def test_model_roundtrip(tmp_path, kind):
    data = _blobs(5)
    model = make_trainer(kind, seed=2)(data)
    model.scaler = {"method": "minmax"}
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert type(back) is type(model)
    assert back.predict_labels(data.X) == model.predict_labels(data.X)
    assert back.scaler == model.scaler


def test_wrong_feature_count():
    m = train_tree(_blobs())
    with pytest.raises(InferenceError):
        m.predict_labels(np.zeros((1, 3)))
