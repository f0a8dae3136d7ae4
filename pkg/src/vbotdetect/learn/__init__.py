"""From-scratch classifiers, voting and cross-validation."""

from .base import Dataset, Model, entropy
from .bayes import NaiveBayesModel, predict_nb, train_nb
from .cv import CVResult, StratificationWarning, accuracy_scorer, kfold_cv, kfold_indices
from .forest import ForestModel, majority_vote, train_forest
from .knn import KnnModel, predict_knn, train_knn
from .persist import MODEL_SCHEMA, load_model, model_from_json, model_to_json, save_model
from .tree import TreeModel, TreeParams, predict, train_tree


def make_trainer(kind: str, seed: int = 0, **params):
    """A ``Dataset -> Model`` callable for one of the model kinds."""
    if kind == "tree":
        tp = TreeParams(**params)
        return lambda d: train_tree(d, tp, seed=seed)
    if kind == "nb":
        return lambda d: train_nb(d, **params)
    if kind == "knn":
        return lambda d: train_knn(d, **params)
    if kind == "forest":
        return lambda d: train_forest(d, seed=seed, **params)
    raise ValueError(f"unknown model kind {kind!r}")
