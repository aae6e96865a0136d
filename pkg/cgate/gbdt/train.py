"""
Second-order histogram boosting with logistic loss.

Each round fits one depth-limited tree to the gradient ``g = w (p - y)`` and hessian
``h = w p (1 - p)`` of the current margins. Splits maximize

    0.5 * (GL^2 / (HL + l2) + GR^2 / (HR + l2) - G^2 / (H + l2))

over histogram bins, trying the missing bin on either side; leaves take the Newton
step ``-G / (H + l2)`` scaled by the learning rate. All accumulation runs in a fixed
order, so a given input always yields the same ensemble.
"""

import math
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..exceptions import DegenerateLabelsError, DimensionError
from ..features.encoder import EncoderState
from ..features.schema import View
from ..logging import logger
from .binning import MAX_BINS, BinMapper
from .model import Ensemble, Tree


class TrainConfig(BaseModel):
    trees: int = Field(default=200, gt=0)
    max_depth: int = Field(default=6, gt=0)
    learning_rate: float = Field(default=0.1, gt=0.0, le=1.0)
    bins: int = Field(default=MAX_BINS, gt=1, le=MAX_BINS)
    min_child_weight: float = Field(default=1.0, gt=0.0)
    l2_leaf: float = Field(default=1.0, gt=0.0)
    positive_class_weight: float = Field(default=1.0, gt=0.0)
    seed: int = 0


def log_loss(y: np.ndarray, margins: np.ndarray, weights: np.ndarray) -> float:
    """Weighted mean logistic loss of raw margins."""
    losses = np.logaddexp(0.0, margins) - y * margins
    return float(np.dot(weights, losses) / weights.sum())


class _TreeBuilder:
    """Grows one tree over pre-binned codes; collects leaf row sets for the margin update."""

    def __init__(self, codes: np.ndarray, mapper: BinMapper, config: TrainConfig):
        self.mapper = mapper
        self.config = config
        self.stride = mapper.max_bins + 1
        n_features = codes.shape[1]
        self.flat_codes = codes + (np.arange(n_features, dtype=np.int32) * self.stride)[None, :]
        self.n_features = n_features
        # the last value bin cannot be a split point: nothing would go right
        bins = np.arange(mapper.max_bins)[None, :]
        self.splittable = bins < (mapper.value_bins[:, None] - 1)

    def grow(self, g: np.ndarray, h: np.ndarray) -> tuple[Tree, list[tuple[np.ndarray, float]]]:
        self.g, self.h = g, h
        self.nodes: dict[str, list] = {k: [] for k in Tree.model_fields}
        self.leaves: list[tuple[np.ndarray, float]] = []
        self._build(np.arange(g.shape[0]), depth=0)
        return Tree(**self.nodes), self.leaves

    def _new_node(self) -> int:
        for column, default in (
            ("feature", -1),
            ("threshold", 0.0),
            ("bin", -1),
            ("missing_left", False),
            ("left", -1),
            ("right", -1),
            ("value", 0.0),
            ("gain", 0.0),
        ):
            self.nodes[column].append(default)
        return len(self.nodes["feature"]) - 1

    def _histograms(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        flat = self.flat_codes[rows].ravel()
        shape = (len(rows), self.n_features)
        size = self.n_features * self.stride
        g = np.broadcast_to(self.g[rows][:, None], shape).ravel()
        h = np.broadcast_to(self.h[rows][:, None], shape).ravel()
        G = np.bincount(flat, weights=g, minlength=size).reshape(self.n_features, self.stride)
        H = np.bincount(flat, weights=h, minlength=size).reshape(self.n_features, self.stride)
        C = np.bincount(flat, minlength=size).reshape(self.n_features, self.stride)
        return G, H, C

    def _best_split(self, rows: np.ndarray, G: float, H: float) -> tuple[int, int, bool, float] | None:
        lam = self.config.l2_leaf
        mcw = self.config.min_child_weight
        Gh, Hh, Ch = self._histograms(rows)
        B = self.mapper.max_bins
        GL = np.cumsum(Gh[:, :B], axis=1)
        HL = np.cumsum(Hh[:, :B], axis=1)
        CL = np.cumsum(Ch[:, :B], axis=1)
        # last axis: 0 = missing goes right, 1 = missing goes left
        GL = np.stack([GL, GL + Gh[:, B:]], axis=-1)
        HL = np.stack([HL, HL + Hh[:, B:]], axis=-1)
        CL = np.stack([CL, CL + Ch[:, B:]], axis=-1)
        GR, HR, CR = G - GL, H - HL, len(rows) - CL

        gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam))
        valid = (HL >= mcw) & (HR >= mcw) & (CL > 0) & (CR > 0) & self.splittable[:, :, None]
        gain = np.where(valid, gain, -np.inf)
        best = int(np.argmax(gain))
        best_gain = float(gain.flat[best])
        if not best_gain > 0.0:
            return None
        feature, bin_index, side = np.unravel_index(best, gain.shape)
        return int(feature), int(bin_index), bool(side), best_gain

    def _build(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node()
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        split = self._best_split(rows, G, H) if depth < self.config.max_depth and len(rows) > 1 else None
        if split is None:
            value = -G / (H + self.config.l2_leaf) * self.config.learning_rate
            self.nodes["value"][node] = value
            self.leaves.append((rows, value))
            return node

        feature, bin_index, missing_left, gain = split
        codes = self.flat_codes[rows, feature] - feature * self.stride
        goes_left = codes <= bin_index
        if missing_left:
            goes_left |= codes == self.mapper.missing_bin
        self.nodes["feature"][node] = feature
        self.nodes["threshold"][node] = self.mapper.threshold(feature, bin_index)
        self.nodes["bin"][node] = bin_index
        self.nodes["missing_left"][node] = missing_left
        self.nodes["gain"][node] = gain
        self.nodes["left"][node] = self._build(rows[goes_left], depth + 1)
        self.nodes["right"][node] = self._build(rows[~goes_left], depth + 1)
        return node


def train(
    vectors: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    weights: Sequence[float] | np.ndarray | None = None,
    config: TrainConfig | None = None,
    *,
    encoder: EncoderState | None = None,
    view: View = "trigger",
    feature_names: Sequence[str] | None = None,
) -> Ensemble:
    """Fit a boosted ensemble on encoded vectors (NaN marks a missing value).

    Raises:
        DegenerateLabelsError: if the labels contain a single class.
        DimensionError: if vectors, labels and weights disagree in length.
    """
    config = config or TrainConfig()
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError(f"{X.shape} vectors for {y.shape[0]} labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    positives = int(y.sum())
    if positives == 0 or positives == y.shape[0]:
        raise DegenerateLabelsError(f"degenerate labels: {positives} positives out of {y.shape[0]}")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape:
        raise DimensionError(f"{w.shape[0]} weights for {y.shape[0]} labels")
    w = w * np.where(y == 1.0, config.positive_class_weight, 1.0)

    if encoder is not None:
        names = [e.name for e in encoder.feature_schema.view_entries(view)]
    else:
        names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DimensionError(f"{X.shape[1]} columns for {len(names)} feature names")

    base_score = math.log(float(w[y == 1.0].sum()) / float(w[y == 0.0].sum()))
    mapper = BinMapper.fit(X, config.bins)
    builder = _TreeBuilder(mapper.transform(X), mapper, config)

    margins = np.full(y.shape[0], base_score)
    history = [log_loss(y, margins, w)]
    trees: list[Tree] = []
    for round_index in range(config.trees):
        p = 0.5 * (1.0 + np.tanh(0.5 * margins))
        tree, leaves = builder.grow(w * (p - y), w * p * (1.0 - p))
        for rows, value in leaves:
            margins[rows] += value
        trees.append(tree)
        history.append(log_loss(y, margins, w))
        logger.debug(f"round {round_index}: {tree.node_count} nodes, loss {history[-1]:.6f}")

    logger.info(f"Trained {len(trees)} trees on {X.shape[0]} rows x {X.shape[1]} features, loss {history[-1]:.5f}")
    return Ensemble(
        base_score=base_score,
        trees=trees,
        encoder=encoder,
        schema_hash=encoder.schema_hash if encoder is not None else "",
        view=view,
        feature_names=names,
        history=history,
    )
