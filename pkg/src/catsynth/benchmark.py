"""Linear vs. factorization-machine comparison on interaction-controlled data.

Each benchmark config names a set of pairwise combination kinds. For every
kind, one child column is built per pair of relevant features. The class
label is a median split of a signed sum of the standardized children, and the
children are then removed, so a model only sees the relevant parents (plus
irrelevant columns) and must recover the interactions itself. Sum-of-squares
children are additive in their parents; every other kind carries a genuine
pairwise interaction.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .config import CombinationSpec, DatasetConfig, Distribution, FeatureSpec, NoiseSpec, TargetSpec
from .dataset import Dataset
from .errors import ConfigError
from .generator import generate_dataset
from .hashing import derive_column_seed
from .metrics import accuracy_and_logloss, auc
from .models import SparseDesign, TrainConfig, encode, predict_proba, train
from .splits import stratified_split

KIND_NAMES = {
    "and": "AND",
    "or": "OR",
    "xor": "XOR",
    "sum_of_squares": "SUM_SQUARES",
    "square_of_sums": "SQUARE_SUMS",
}
ALL_KINDS = tuple(KIND_NAMES)

# the eleven interaction configs, keyed by id
INTERACTION_CONFIGS: dict[int, tuple[str, ...]] = {
    1: ("and",),
    2: ("or",),
    3: ("xor",),
    4: ("and", "or"),
    5: ("and", "or", "xor"),
    6: ("sum_of_squares",),
    7: ("square_of_sums",),
    8: ("sum_of_squares", "square_of_sums"),
    9: ("and", "or", "xor", "sum_of_squares"),
    10: ("and", "or", "xor", "square_of_sums"),
    11: ("and", "or", "xor", "sum_of_squares", "square_of_sums"),
}

LEARNING_RATE_GRID = (0.01, 0.05, 0.1)
NOISE_LEVEL = 0.2
MODEL_KINDS = ("linear", "fm")

_STAGE_SPLIT = 11
_STAGE_TUNE = 12
_STAGE_TRAIN = 13


def base_config(
    n_rows: int = 10_000,
    n_relevant: int = 4,
    n_irrelevant: int = 750,
    relevant_cardinality: int = 2,
    irrelevant_cardinality: tuple[int, int] = (20, 200),
    seed: int = 0,
) -> DatasetConfig:
    """Relevant features ``REL*`` first, then ``IRR*`` columns with uniform codes.

    Irrelevant cardinalities are drawn once from ``seed`` within the given
    inclusive range. The target is the default nonlinear relation over the
    first four relevant features.
    """
    if n_relevant < 4:
        raise ConfigError("need at least 4 relevant features", "n_relevant")
    lo, hi = irrelevant_cardinality
    rng = np.random.default_rng(derive_column_seed(seed, 0, 99))
    cards = rng.integers(lo, hi + 1, n_irrelevant)
    feats = [FeatureSpec(f"REL{i}", relevant_cardinality, Distribution("uniform")) for i in range(n_relevant)]
    feats += [FeatureSpec(f"IRR{i}", int(c), Distribution("uniform")) for i, c in enumerate(cards)]
    return DatasetConfig(n_rows, tuple(feats), target=TargetSpec("nonlinear", tuple(range(4))), seed=seed)


def relevant_pairs(relevant: Sequence[int]) -> list[tuple[int, int]]:
    """All pairs of relevant columns; a pair's position is its rank in child names."""
    return list(itertools.combinations(relevant, 2))


def pairwise_combinations(relevant: Sequence[int], kinds: Sequence[str]) -> list[CombinationSpec]:
    """One child per (kind, pair), named KIND + pair rank, e.g. ``OR3``."""
    pairs = relevant_pairs(relevant)
    return [CombinationSpec(kind, pair, f"{KIND_NAMES[kind]}{rank}") for kind in kinds for rank, pair in enumerate(pairs)]


def interaction_config(base: DatasetConfig, kinds: Sequence[str], noise: float = NOISE_LEVEL,
                       layout: str = "drop_children") -> DatasetConfig:
    """Derive one benchmark dataset recipe from ``base``.

    ``drop_children``: the label is a median split of a random-sign sum of the
    standardized children, and the children are removed. ``drop_parents``:
    the base target labels the data, and the relevant parents are removed so
    only their combinations remain.
    """
    if base.target is None or len(base.target.relevant) < 4:
        raise ConfigError("base config needs a target with at least 4 relevant features", "target.relevant")
    relevant = base.target.relevant
    combos = pairwise_combinations(relevant, kinds)
    n0 = base.n_columns_before_drop
    children = tuple(range(n0, n0 + len(combos)))
    if layout == "drop_children":
        target, drop = TargetSpec("linear", children), children
    elif layout == "drop_parents":
        target, drop = base.target, tuple(relevant)
    else:
        raise ConfigError(f"unknown layout {layout!r}", "layout")
    return replace(
        base,
        combinations=base.combinations + tuple(combos),
        target=target,
        aux_targets=(),
        drop_after_combine=tuple(base.drop_after_combine) + drop,
        noise=(NoiseSpec(noise, "categorical"),) if noise > 0 else (),
    ).validate()


@dataclass
class MetricsRow:
    config_id: str
    model: str
    auc: float
    accuracy: float
    log_loss: float
    split_seed: int
    learning_rate: float


@dataclass
class MetricsReport:
    rows: list[MetricsRow] = field(default_factory=list)
    predictions: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config_id", "model", "auc", "accuracy", "log_loss", "split_seed", "learning_rate"])
        for r in self.rows:
            w.writerow([r.config_id, r.model, repr(r.auc), repr(r.accuracy), repr(r.log_loss), r.split_seed, r.learning_rate])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "rows": [asdict(r) for r in self.rows]}, indent=1)

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config_id", "model", "row", "label", "prob"])
        for p in self.predictions:
            for row, lab, prob in zip(p["rows"], p["labels"], p["probs"]):
                w.writerow([p["config_id"], p["model"], int(row), int(lab), repr(float(prob))])
        return buf.getvalue()

    def get(self, config_id: str, model: str) -> MetricsRow:
        for r in self.rows:
            if r.config_id == config_id and r.model == model:
                return r
        raise KeyError((config_id, model))


def fit_tuned(kind: str, X: SparseDesign, y: np.ndarray, train_rows: np.ndarray, seed: int,
              base_cfg: Optional[TrainConfig] = None, grid: Sequence[float] = LEARNING_RATE_GRID):
    """Pick a learning rate on a stratified validation fifth, then refit on all of ``train_rows``.

    Returns ``(model, learning_rate)``; the grid is scanned in order and the
    first rate with the best validation AUC wins.
    """
    base_cfg = base_cfg or TrainConfig()
    fit_idx, val_idx = stratified_split(y[train_rows], 5, derive_column_seed(seed, 0, _STAGE_TUNE))
    fit_rows, val_rows = train_rows[fit_idx], train_rows[val_idx]
    train_seed = derive_column_seed(seed, 0, _STAGE_TRAIN)
    best_lr, best_auc = grid[0], -np.inf
    for lr in grid:
        cfg = replace(base_cfg, learning_rate=lr, seed=train_seed)
        model = train(kind, X, y, cfg, fit_rows)
        score = auc(predict_proba(model, X, val_rows), y[val_rows])
        if score > best_auc:
            best_lr, best_auc = lr, score
    model = train(kind, X, y, replace(base_cfg, learning_rate=best_lr, seed=train_seed), train_rows)
    return model, best_lr


def evaluate_design(config_id: str, X: SparseDesign, y: np.ndarray, seed: int,
                    models: Sequence[str] = MODEL_KINDS, base_cfg: Optional[TrainConfig] = None,
                    keep_predictions: bool = False) -> MetricsReport:
    """80/20 stratified split, tuned fit per model kind, test metrics."""
    split_seed = derive_column_seed(seed, 0, _STAGE_SPLIT)
    train_rows, test_rows = stratified_split(y, 5, split_seed)
    report = MetricsReport()
    for kind in models:
        model, lr = fit_tuned(kind, X, y, train_rows, seed, base_cfg)
        probs = predict_proba(model, X, test_rows)
        acc, ll = accuracy_and_logloss(probs, y[test_rows])
        report.rows.append(MetricsRow(config_id, kind, auc(probs, y[test_rows]), acc, ll, split_seed, lr))
        if keep_predictions:
            report.predictions.append({"config_id": config_id, "model": kind, "rows": test_rows,
                                       "labels": y[test_rows], "probs": probs})
    return report


def run_interaction_benchmark(
    base: DatasetConfig,
    seed: int,
    configs: Optional[dict[int, Sequence[str]]] = None,
    noise: float = NOISE_LEVEL,
    train_cfg: Optional[TrainConfig] = None,
    keep_predictions: bool = False,
    threads: int = 1,
) -> MetricsReport:
    """Train linear and FM models on every interaction config of ``base``.

    All configs share the base features and noise streams (``base.seed``);
    ``seed`` drives the splits and model initialization.
    """
    configs = INTERACTION_CONFIGS if configs is None else configs

    def one(item):
        cid, kinds = item
        d = generate_dataset(interaction_config(base, kinds, noise))
        return evaluate_design(str(cid), encode(d), d.labels, seed, base_cfg=train_cfg, keep_predictions=keep_predictions)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, configs.items()))
    else:
        parts = [one(item) for item in configs.items()]
    report = MetricsReport(meta={
        "seed": seed,
        "base_seed": base.seed,
        "noise": noise,
        "configs": {str(k): list(v) for k, v in configs.items()},
        "learning_rate_grid": list(LEARNING_RATE_GRID),
    })
    for part in parts:
        report.rows.extend(part.rows)
        report.predictions.extend(part.predictions)
    return report


def restrict(d: Dataset, columns: Sequence[int]) -> Dataset:
    return d.with_columns([d.columns[j] for j in columns], [d.meta[j] for j in columns])
