"""
Array-encoded boosted tree ensembles: prediction, importance and the JSON artifact.

Single rows are scored by a plain Python tree walk (fast for serving); batches use a
vectorized walk. Both add the base score first and then one leaf value per tree in
tree order, and both apply the same scalar sigmoid, so their outputs are identical.
"""

import json
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, ValidationError, model_validator

from ..events.types import FeatureBag
from ..exceptions import ArtifactError, ArtifactVersionError, DimensionError, SchemaMismatchError
from ..features.encoder import EncoderState, transform, transform_many
from ..features.schema import View
from ..logging import logger

FORMAT_VERSION = "cgate-gbdt/1"
PROBABILITY_EPS = 1e-15


def sigmoid(margin: float) -> float:
    """Logistic function kept strictly inside (0, 1)."""
    if margin >= 0.0:
        p = 1.0 / (1.0 + math.exp(-margin))
    else:
        e = math.exp(margin)
        p = e / (1.0 + e)
    return min(max(p, PROBABILITY_EPS), 1.0 - PROBABILITY_EPS)


class Tree(BaseModel):
    """One regression tree in node arrays; node 0 is the root, ``feature == -1`` marks a leaf.

    An internal node sends a row left when its value is below ``threshold``; NaN goes
    left iff ``missing_left``. ``bin`` is the histogram bin the threshold came from.
    """

    feature: list[int]
    threshold: list[float]
    bin: list[int]
    missing_left: list[bool]
    left: list[int]
    right: list[int]
    value: list[float]
    gain: list[float]

    _arrays: tuple = PrivateAttr()

    @model_validator(mode="after")
    def _check_arrays(self) -> "Tree":
        n = len(self.feature)
        columns = (self.threshold, self.bin, self.missing_left, self.left, self.right, self.value, self.gain)
        if n == 0 or any(len(c) != n for c in columns):
            raise ValueError("tree node arrays must be non-empty and of equal length")
        for i, f in enumerate(self.feature):
            # children come after their parent, so every walk ends at a leaf
            if f >= 0 and not (i < self.left[i] < n and i < self.right[i] < n):
                raise ValueError(f"node {i} has children outside the tree or before itself")
        return self

    def model_post_init(self, __context) -> None:
        self._arrays = (
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.missing_left, dtype=bool),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
        )

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def leaf_value(self, x: Sequence[float]) -> float:
        feature, threshold, missing_left, left, right = (
            self.feature,
            self.threshold,
            self.missing_left,
            self.left,
            self.right,
        )
        node = 0
        while feature[node] >= 0:
            v = x[feature[node]]
            if v != v:
                node = left[node] if missing_left[node] else right[node]
            elif v < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        return self.value[node]

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        feature, threshold, missing_left, left, right, value = self._arrays
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            active = np.nonzero(feature[node] >= 0)[0]
            if active.size == 0:
                return value[node]
            at = node[active]
            v = X[active, feature[at]]
            go_left = np.where(np.isnan(v), missing_left[at], v < threshold[at])
            node[active] = np.where(go_left, left[at], right[at])


class Ensemble(BaseModel):
    """Boosted trees plus the encoder that turns feature bags into their input vectors."""

    format_version: str = FORMAT_VERSION
    base_score: float
    trees: list[Tree] = Field(default_factory=list)
    encoder: EncoderState | None = None
    schema_hash: str = ""
    view: View = "trigger"
    feature_names: list[str] = Field(default_factory=list)
    history: list[float] = Field(default_factory=list, description="training log loss before and after each round")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def margin(self, x: Sequence[float]) -> float:
        total = self.base_score
        for tree in self.trees:
            total += tree.leaf_value(x)
        return total

    def score_bag(self, bag: FeatureBag, context: str | None = None) -> float:
        if self.encoder is None:
            raise ArtifactError("ensemble has no encoder; score vectors with predict_proba instead")
        return predict_proba(self, transform(bag, self.encoder, self.view))

    def score_bags(self, bags: Sequence[FeatureBag], contexts: Sequence[str | None] | None = None) -> np.ndarray:
        if self.encoder is None:
            raise ArtifactError("ensemble has no encoder; score vectors with predict_many instead")
        return predict_many(self, transform_many(bags, self.encoder, self.view))


def _check_width(model: Ensemble, width: int) -> None:
    if model.feature_names and width != model.n_features:
        raise DimensionError(f"vector has {width} values, model expects {model.n_features}")


def predict_proba(model: Ensemble, vector: Sequence[float] | np.ndarray) -> float:
    """Probability of the positive class for one encoded vector."""
    x = vector.tolist() if isinstance(vector, np.ndarray) else list(vector)
    _check_width(model, len(x))
    return sigmoid(model.margin(x))


def predict_many(model: Ensemble, matrix: np.ndarray) -> np.ndarray:
    """Row-wise ``predict_proba`` over a 2-D matrix."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {X.shape}")
    _check_width(model, X.shape[1])
    margins = np.full(X.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        margins += tree.leaf_values(X)
    return np.array([sigmoid(m) for m in margins.tolist()], dtype=np.float64)


def predict_bag(model: Ensemble, bag: FeatureBag) -> float:
    return model.score_bag(bag)


def feature_importance(model: Ensemble) -> dict[str, float]:
    """Total split gain per feature; features never split on get 0."""
    importance = dict.fromkeys(model.feature_names, 0.0)
    for tree in model.trees:
        for feature, gain in zip(tree.feature, tree.gain, strict=True):
            if feature >= 0:
                name = model.feature_names[feature] if model.feature_names else f"f{feature}"
                importance[name] = importance.get(name, 0.0) + gain
    return importance


def save(model: Ensemble, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(model.model_dump_json(), encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot write model {path}: {e}") from e
    logger.info(f"Saved {len(model.trees)}-tree {model.view} model to {path}")
    return path


def parse(document: dict, source: str = "<artifact>", schema_hash: str | None = None) -> Ensemble:
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactVersionError(f"{source}: unsupported model format {version!r}, expected {FORMAT_VERSION}")
    try:
        model = Ensemble.model_validate(document)
    except ValidationError as e:
        raise ArtifactError(f"{source}: malformed model artifact: {e}") from e
    if model.encoder is not None and model.encoder.schema_hash != model.schema_hash:
        raise SchemaMismatchError(f"{source}: encoder schema {model.encoder.schema_hash} != model {model.schema_hash}")
    if schema_hash is not None and model.schema_hash != schema_hash:
        raise SchemaMismatchError(f"{source}: model schema {model.schema_hash} != expected {schema_hash}")
    return model


def load(path: str | Path, schema_hash: str | None = None) -> Ensemble:
    """Load a ``cgate-gbdt/1`` artifact, optionally pinning the expected schema hash."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}: not JSON: {e}") from e
    if not isinstance(document, dict):
        raise ArtifactError(f"{path}: artifact must be a JSON object")
    return parse(document, str(path), schema_hash)
