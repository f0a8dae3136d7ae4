"""Schema-versioned JSON serialization of trained models."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from .base import Model
from .bayes import NaiveBayesModel
from .forest import ForestModel
from .knn import KnnModel
from .tree import TreeModel

MODEL_SCHEMA = "vbotdetect.model/1"
MODEL_KINDS = {"tree": TreeModel, "nb": NaiveBayesModel, "knn": KnnModel, "forest": ForestModel}


def model_to_json(model: Model) -> dict[str, Any]:
    return {"schema": MODEL_SCHEMA, "kind": model.kind, "scaler": model.scaler, "model": model.to_json()}


def model_from_json(obj: dict[str, Any]) -> Model:
    if obj.get("schema") != MODEL_SCHEMA:
        raise ConfigError(f"unrecognized model schema {obj.get('schema')!r}")
    try:
        cls = MODEL_KINDS[obj["kind"]]
    except KeyError:
        raise ConfigError(f"unknown model kind {obj.get('kind')!r}") from None
    return cls.from_json(obj["model"], obj.get("scaler"))


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
