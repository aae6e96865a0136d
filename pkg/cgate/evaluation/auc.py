from collections.abc import Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from ..exceptions import DegenerateLabelsError

_BLOCK = 512


def roc_auc(labels: Sequence[int] | np.ndarray, scores: Sequence[float] | np.ndarray) -> float:
    y = np.asarray(labels)
    if y.size == 0 or y.min() == y.max():
        raise DegenerateLabelsError("ROC AUC needs both classes")
    return float(roc_auc_score(y, np.asarray(scores, dtype=np.float64)))


def bayes_auc(probabilities: Sequence[float] | np.ndarray) -> float:
    """Expected AUC of ranking records by their true acceptance probabilities.

    Every ordered pair (i, j), i != j, is weighted by the chance that i is positive and
    j negative, ``p_i * (1 - p_j)``; it counts 1 when ``p_i > p_j`` and 1/2 on a tie.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    q = 1.0 - p
    concordant = 0.0
    total = 0.0
    for start in range(0, p.size, _BLOCK):
        rows = p[start : start + _BLOCK]
        weight = rows[:, None] * q[None, :]
        diagonal = np.arange(rows.size)
        weight[diagonal, start + diagonal] = 0.0
        order = (rows[:, None] > p[None, :]) + 0.5 * (rows[:, None] == p[None, :])
        concordant += float(np.sum(weight * order))
        total += float(np.sum(weight))
    if total == 0.0:
        raise DegenerateLabelsError("probabilities admit no positive/negative pair")
    return concordant / total
