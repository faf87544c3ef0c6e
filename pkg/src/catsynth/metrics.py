import numpy as np
from scipy.stats import rankdata

from .errors import UsageError

EPS = 1e-15


def auc(scores, labels) -> float:
    """ROC AUC as the Mann-Whitney U statistic, tied scores sharing average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UsageError("AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def log_loss(probs, labels) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), EPS, 1.0 - EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def accuracy_and_logloss(scores, labels, threshold: float = 0.5) -> tuple[float, float]:
    """Accuracy of ``scores >= threshold`` and mean cross-entropy of the clipped probabilities."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    acc = float(np.mean((scores >= threshold).astype(np.int64) == labels))
    return acc, log_loss(scores, labels)
