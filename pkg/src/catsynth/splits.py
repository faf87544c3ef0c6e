from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Shuffle each class, then deal its rows round-robin over the folds.

    The deal continues across classes, so fold sizes differ by at most one
    overall and within each class.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise UsageError(f"need k >= 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(labels.size, dtype=np.int64)
    start = 0
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        if rows.size < k:
            raise UsageError(f"class {cls} has {rows.size} rows, fewer than k={k}")
        rows = rng.permutation(rows)
        assignments[rows] = (start + np.arange(rows.size)) % k
        start = (start + rows.size) % k
    return FoldPlan(k, assignments, seed)


def stratified_split(labels, test_fraction_denominator: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``(train, test)`` row indices with a ``1/denominator`` stratified test share."""
    return stratified_kfold(labels, test_fraction_denominator, seed).train_test(0)
