"""One-hot encoding, logistic regression and a degree-2 factorization machine.

Both models are trained by plain per-row SGD on the logistic loss with L2
applied to the parameters active in the row. The inner loops are compiled
with numba; the per-row gradient kernels are exposed so they can be checked
against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numba
import numpy as np

from .dataset import MISSING, Dataset
from .errors import ConfigError, UsageError
from .hashing import item_hash_array, mix64


@dataclass(frozen=True)
class SparseDesign:
    """Row-major one-hot design with exactly one active dimension per field.

    ``indices[r, f]`` is the active dimension of field ``f`` (an original
    column) in row ``r``; every active value is implicitly 1.
    """

    indices: np.ndarray
    n_dims: int
    field_names: tuple[str, ...]
    hashed_dim: Optional[int] = None

    @property
    def n_rows(self) -> int:
        return self.indices.shape[0]

    @property
    def n_fields(self) -> int:
        return self.indices.shape[1]

    def rows(self, which) -> "SparseDesign":
        return replace(self, indices=np.ascontiguousarray(self.indices[which]))

    def fields(self, which: Sequence[int]) -> "SparseDesign":
        which = list(which)
        return replace(self, indices=np.ascontiguousarray(self.indices[:, which]),
                       field_names=tuple(self.field_names[f] for f in which))


def encode(d: Dataset, hashed_dim: Optional[int] = None, seed: int = 0) -> SparseDesign:
    """One-hot encode every column of ``d``.

    Unhashed, each observed (column, code) pair gets its own dimension and a
    column with missing cells gets one extra "missing" dimension. Hashed,
    the dimension is ``hash(column, code) mod hashed_dim``.
    """
    n, n_cols = d.n_rows, d.n_columns
    idx = np.empty((n, n_cols), dtype=np.int64)
    if hashed_dim is not None:
        if hashed_dim < n_cols:
            raise ConfigError(f"hashed_dim={hashed_dim} is smaller than the {n_cols} columns", "hashed_dim")
        for j, col in enumerate(d.columns):
            h = item_hash_array(col, mix64(seed * 0x10001 + j + 1))
            idx[:, j] = (h % np.uint64(hashed_dim)).astype(np.int64)
        return SparseDesign(idx, hashed_dim, tuple(d.names), hashed_dim)
    offset = 0
    for j, col in enumerate(d.columns):
        missing = col == MISSING
        codes, inverse = np.unique(col[~missing], return_inverse=True)
        idx[~missing, j] = offset + inverse
        offset += codes.size
        if missing.any():
            idx[missing, j] = offset
            offset += 1
    return SparseDesign(idx, offset, tuple(d.names))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 1
    l2: float = 1e-6
    k: int = 8
    init_scale: float = 0.01
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0", "learning_rate")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1", "epochs")
        if self.k < 1:
            raise ConfigError("k must be >= 1", "k")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0", "l2")


@dataclass
class LinearModel:
    bias: float
    weights: np.ndarray

    @classmethod
    def zeros(cls, n_dims: int) -> "LinearModel":
        return cls(0.0, np.zeros(n_dims))

    @property
    def n_dims(self) -> int:
        return self.weights.size


@dataclass
class FmModel:
    bias: float
    weights: np.ndarray
    factors: np.ndarray  # (n_dims, k)

    @classmethod
    def zeros(cls, n_dims: int, k: int) -> "FmModel":
        return cls(0.0, np.zeros(n_dims), np.zeros((n_dims, k)))

    @property
    def n_dims(self) -> int:
        return self.weights.size


# --- compiled kernels -------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _sigmoid(s):
    if s >= 0:
        return 1.0 / (1.0 + np.exp(-s))
    e = np.exp(s)
    return e / (1.0 + e)


@numba.njit(cache=True, nogil=True)
def _linear_score(idx_row, bias, w):
    s = bias
    for i in idx_row:
        s += w[i]
    return s


@numba.njit(cache=True, nogil=True)
def _fm_score(idx_row, bias, w, v):
    # O(n*k): 0.5 * sum_f [(sum_i v_if)^2 - sum_i v_if^2]
    s = bias
    for i in idx_row:
        s += w[i]
    k = v.shape[1]
    pair = 0.0
    for f in range(k):
        tot = 0.0
        sq = 0.0
        for i in idx_row:
            tot += v[i, f]
            sq += v[i, f] * v[i, f]
        pair += tot * tot - sq
    return s + 0.5 * pair


@numba.njit(cache=True, nogil=True)
def linear_row_grad(idx_row, y, bias, w, l2):
    """Gradient of ``logloss + l2/2 * sum(w[active]^2)`` for one row.

    Returns (d_bias, d_w) with one ``d_w`` entry per active index occurrence.
    """
    g = _sigmoid(_linear_score(idx_row, bias, w)) - y
    gw = np.empty(idx_row.size)
    for a in range(idx_row.size):
        gw[a] = g + l2 * w[idx_row[a]]
    return g, gw


@numba.njit(cache=True, nogil=True)
def fm_row_grad(idx_row, y, bias, w, v, l2):
    """Gradient of ``logloss + l2/2 * sum(w[active]^2 + |v[active]|^2)`` for one row."""
    k = v.shape[1]
    g = _sigmoid(_fm_score(idx_row, bias, w, v)) - y
    sums = np.zeros(k)
    for i in idx_row:
        for f in range(k):
            sums[f] += v[i, f]
    gw = np.empty(idx_row.size)
    gv = np.empty((idx_row.size, k))
    for a in range(idx_row.size):
        i = idx_row[a]
        gw[a] = g + l2 * w[i]
        for f in range(k):
            gv[a, f] = g * (sums[f] - v[i, f]) + l2 * v[i, f]
    return g, gw, gv


@numba.njit(cache=True, nogil=True)
def _sgd_linear(idx, y, order, bias, w, lr, l2):
    for r in order:
        row = idx[r]
        gb, gw = linear_row_grad(row, y[r], bias, w, l2)
        bias -= lr * gb
        for a in range(row.size):
            w[row[a]] -= lr * gw[a]
    return bias


@numba.njit(cache=True, nogil=True)
def _sgd_fm(idx, y, order, bias, w, v, lr, l2):
    k = v.shape[1]
    for r in order:
        row = idx[r]
        gb, gw, gv = fm_row_grad(row, y[r], bias, w, v, l2)
        bias -= lr * gb
        for a in range(row.size):
            i = row[a]
            w[i] -= lr * gw[a]
            for f in range(k):
                v[i, f] -= lr * gv[a, f]
    return bias


@numba.njit(cache=True, nogil=True)
def _scores_linear(idx, bias, w):
    out = np.empty(idx.shape[0])
    for r in range(idx.shape[0]):
        out[r] = _linear_score(idx[r], bias, w)
    return out


@numba.njit(cache=True, nogil=True)
def _scores_fm(idx, bias, w, v):
    out = np.empty(idx.shape[0])
    for r in range(idx.shape[0]):
        out[r] = _fm_score(idx[r], bias, w, v)
    return out


# --- public API -------------------------------------------------------------


def _check_labels(X: SparseDesign, y, rows) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y)
    if X.n_rows == 0:
        raise UsageError("design matrix is empty")
    if y.shape != (X.n_rows,):
        raise UsageError(f"labels have shape {y.shape}, expected ({X.n_rows},)")
    rows = np.arange(X.n_rows) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise UsageError("no training rows")
    if not np.isin(y[rows], (0, 1)).all():
        raise UsageError("labels must be binary (0/1)")
    return y.astype(np.float64), rows


def _orders(rows, cfg: TrainConfig, rng):
    # one visiting order per epoch: rows[permutation] when shuffling
    for _ in range(cfg.epochs):
        yield rows[rng.permutation(rows.size)] if cfg.shuffle else rows


def train_linear(X: SparseDesign, y, cfg: TrainConfig, rows=None) -> LinearModel:
    """Logistic regression by SGD; deterministic given ``(X, y, cfg)``.

    ``rows`` restricts training to a subset of rows without copying ``X``.
    """
    yf, rows = _check_labels(X, y, rows)
    rng = np.random.default_rng(cfg.seed)
    model = LinearModel.zeros(X.n_dims)
    for order in _orders(rows, cfg, rng):
        model.bias = _sgd_linear(X.indices, yf, order, model.bias, model.weights, cfg.learning_rate, cfg.l2)
    return model


def train_fm(X: SparseDesign, y, cfg: TrainConfig, rows=None) -> FmModel:
    """Degree-2 factorization machine by SGD, factors drawn from N(0, init_scale^2)."""
    yf, rows = _check_labels(X, y, rows)
    rng = np.random.default_rng(cfg.seed)
    model = FmModel(0.0, np.zeros(X.n_dims), rng.normal(0.0, cfg.init_scale, (X.n_dims, cfg.k)))
    for order in _orders(rows, cfg, rng):
        model.bias = _sgd_fm(X.indices, yf, order, model.bias, model.weights, model.factors, cfg.learning_rate, cfg.l2)
    return model


def decision_scores(model, X: SparseDesign, rows=None) -> np.ndarray:
    if model.n_dims != X.n_dims:
        raise UsageError(f"model has {model.n_dims} dims, design has {X.n_dims}")
    idx = X.indices if rows is None else X.indices[rows]
    if isinstance(model, FmModel):
        return _scores_fm(idx, model.bias, model.weights, model.factors)
    return _scores_linear(idx, model.bias, model.weights)


def sigmoid(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def predict_proba(model, X: SparseDesign, rows=None) -> np.ndarray:
    return sigmoid(decision_scores(model, X, rows))


def train(kind: str, X: SparseDesign, y, cfg: TrainConfig, rows=None):
    if kind == "linear":
        return train_linear(X, y, cfg, rows)
    if kind == "fm":
        return train_fm(X, y, cfg, rows)
    raise UsageError(f"unknown model kind {kind!r}")
