from collections.abc import Sequence

import numpy as np
import torch
from sklearn.metrics import roc_auc_score

from ..exceptions import DegenerateLabelsError, DimensionError, ModalityError
from ..features.encoder import EncoderState
from ..features.schema import View
from ..logging import logger
from .model import Batch, EpochStats, HybridConfig, HybridModel, batch_loss, build_net, round_to_float32
from .tokenize import tokenize_context


def _auc_or_none(labels: np.ndarray, scores: np.ndarray) -> float | None:
    if labels.size == 0 or labels.min() == labels.max():
        return None
    return float(roc_auc_score(labels, scores))


def train_hybrid(
    contexts: Sequence[str | None],
    vectors: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    config: HybridConfig | None = None,
    *,
    encoder: EncoderState | None = None,
    view: View = "trigger",
    feature_names: Sequence[str] | None = None,
) -> HybridModel:
    """Train the fusion classifier with minibatch Adam on logistic loss.

    ``vectors`` are imputed tabular encodings (no NaN). A seeded permutation holds out
    ``validation_fraction`` of the rows; the rest are reshuffled every epoch from the
    same generator, and weights are initialized from ``config.seed``, so a run is fully
    determined by its inputs and the seed.

    Raises:
        ModalityError: if any record has no context.
        DegenerateLabelsError: if the labels contain a single class.
    """
    config = config or HybridConfig()
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or len(contexts) != y.shape[0]:
        raise DimensionError(f"{len(contexts)} contexts, {X.shape} vectors, {y.shape[0]} labels")
    absent = sum(1 for c in contexts if c is None)
    if absent:
        raise ModalityError(f"{absent} of {len(contexts)} records carry no code context")
    if np.isnan(X).any():
        raise ValueError("hybrid inputs must be imputed; found NaN")
    if y.min() == y.max():
        raise DegenerateLabelsError(f"degenerate labels: all {y.shape[0]} records are {int(y[0])}")

    rng = np.random.default_rng(config.seed)
    tokens = [tokenize_context(c, config.vocab_buckets) for c in contexts]
    order = rng.permutation(y.shape[0])
    n_val = int(round(config.validation_fraction * y.shape[0]))
    val_rows, train_rows = order[:n_val], order[n_val:]
    prior = float(y[train_rows].mean()) if train_rows.size else float(y.mean())

    net = build_net(config, X.shape[1], prior)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.step_size)
    val_batch = Batch.build([tokens[i] for i in val_rows], X[val_rows]) if n_val else None

    history: list[EpochStats] = []
    for epoch in range(config.epochs):
        net.train()
        shuffled = rng.permutation(train_rows)
        total = 0.0
        for start in range(0, shuffled.size, config.batch_size):
            rows = shuffled[start : start + config.batch_size]
            batch = Batch.build([tokens[i] for i in rows], X[rows])
            optimizer.zero_grad()
            loss = batch_loss(net, batch, y[rows])
            loss.backward()
            optimizer.step()
            total += loss.item() * rows.size
        val_auc = None
        if val_batch is not None:
            net.eval()
            with torch.no_grad():
                val_auc = _auc_or_none(y[val_rows], net(val_batch).numpy())
        stats = EpochStats(epoch=epoch, train_loss=total / max(shuffled.size, 1), validation_auc=val_auc)
        history.append(stats)
        logger.info(f"epoch {epoch}: loss {stats.train_loss:.5f}, validation AUC {val_auc}")

    round_to_float32(net)
    net.eval()
    if encoder is not None:
        names = [e.name for e in encoder.feature_schema.view_entries(view)]
    else:
        names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    return HybridModel(config=config, net=net, encoder=encoder, view=view, feature_names=names, history=history)
