"""Greedy forward feature selection scored by a cross-validated linear surrogate."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .benchmark import ALL_KINDS, MetricsReport, base_config, evaluate_design, interaction_config
from .config import DatasetConfig
from .dataset import Dataset
from .errors import UsageError
from .generator import generate_dataset
from .hashing import derive_column_seed
from .metrics import log_loss
from .models import SparseDesign, TrainConfig, encode, predict_proba, train_linear
from .splits import FoldPlan, stratified_kfold

__all__ = [
    "FoldPlan",
    "stratified_kfold",
    "SURROGATE_CONFIG",
    "N_FOLDS",
    "IMPROVEMENT_EPS",
    "SelectionState",
    "TraceStep",
    "EvolutionTrace",
    "selection_plan",
    "fold_scores",
    "surrogate_score",
    "forward_select",
    "automl_config",
    "run_automl_experiment",
]

# fixed surrogate: no hyperparameter search
SURROGATE_CONFIG = TrainConfig(learning_rate=0.05, epochs=1, l2=1e-6)
N_FOLDS = 4
IMPROVEMENT_EPS = 1e-6
_STAGE_FOLDS = 21


@dataclass
class SelectionState:
    selected: list[int]
    candidates: list[int]
    budget: int
    stop_on_no_improvement: bool = False

    def add(self, j: int) -> None:
        if j not in self.candidates:
            raise UsageError(f"column {j} is not a candidate")
        self.candidates.remove(j)
        self.selected.append(j)

    @property
    def done(self) -> bool:
        return len(self.selected) >= self.budget or not self.candidates


@dataclass
class TraceStep:
    round: int
    column: int
    name: str
    mean_score: float
    fold_scores: list[float]
    # every candidate's mean score this round, keyed by column index
    candidate_scores: dict[int, float] = field(default_factory=dict, repr=False)


@dataclass
class EvolutionTrace:
    steps: list[TraceStep] = field(default_factory=list)
    dataset: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[int]:
        return [s.column for s in self.steps]

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def to_csv(self) -> str:
        k = max((len(s.fold_scores) for s in self.steps), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "chosen_column_name", "mean_score"] + [f"fold{i}_score" for i in range(k)])
        for s in self.steps:
            w.writerow([s.round, s.name, repr(s.mean_score)] + [repr(f) for f in s.fold_scores])
        return buf.getvalue()

    def to_json(self) -> str:
        steps = []
        for s in self.steps:
            row = asdict(s)
            row["candidate_scores"] = {str(k): v for k, v in s.candidate_scores.items()}
            steps.append(row)
        return json.dumps({"dataset": self.dataset, "steps": steps}, indent=1)


def selection_plan(labels, seed: int, n_folds: int = N_FOLDS) -> FoldPlan:
    """The fold plan :func:`forward_select` uses for ``seed``."""
    return stratified_kfold(labels, n_folds, derive_column_seed(seed, 0, _STAGE_FOLDS))


def fold_scores(X: SparseDesign, y: np.ndarray, plan: FoldPlan, cfg: TrainConfig = SURROGATE_CONFIG) -> list[float]:
    """Negative held-out log loss per fold of a linear model trained on the other folds."""
    out = []
    for fold in range(plan.k):
        train_rows, test_rows = plan.train_test(fold)
        model = train_linear(X, y, cfg, train_rows)
        out.append(-log_loss(predict_proba(model, X, test_rows), y[test_rows]))
    return out


def surrogate_score(d: Dataset, subset: Sequence[int], plan: FoldPlan, cfg: TrainConfig = SURROGATE_CONFIG,
                    design: Optional[SparseDesign] = None) -> float:
    """Mean cross-validated negative log loss of the columns in ``subset``.

    ``design`` may be a precomputed ``encode(d)`` to avoid re-encoding.
    """
    if len(subset) == 0:
        raise UsageError("subset must be non-empty")
    if d.labels is None:
        raise UsageError("dataset has no labels")
    X = (design if design is not None else encode(d)).fields(subset)
    return float(np.mean(fold_scores(X, d.labels, plan, cfg)))


def forward_select(
    d: Dataset,
    budget: int,
    cfg: TrainConfig = SURROGATE_CONFIG,
    seed: int = 0,
    stop_on_no_improvement: bool = False,
    threads: int = 1,
    n_folds: int = N_FOLDS,
    candidates: Optional[Sequence[int]] = None,
) -> EvolutionTrace:
    """Grow a feature set one column per round by the best surrogate score.

    Ties go to the lowest column index. The fold plan is drawn once from
    ``seed``, so a run with a smaller budget is a prefix of a larger one.
    """
    if budget < 1:
        raise UsageError("budget must be >= 1")
    if d.labels is None:
        raise UsageError("dataset has no labels")
    y = d.labels
    plan = selection_plan(y, seed, n_folds)
    X = encode(d)
    pool = sorted(range(d.n_columns) if candidates is None else candidates)
    state = SelectionState([], pool, budget, stop_on_no_improvement)
    trace = EvolutionTrace(dataset={"n_rows": d.n_rows, "n_columns": d.n_columns, "seed": d.seed,
                                    "selection_seed": seed, "folds": n_folds})
    best_prev = -np.inf

    def score(j):
        return fold_scores(X.fields(state.selected + [j]), y, plan, cfg)

    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while not state.done:
            cands = list(state.candidates)
            folds = list(executor.map(score, cands)) if executor else [score(j) for j in cands]
            means = [float(np.mean(f)) for f in folds]
            # candidates are sorted, so argmax returns the lowest index among ties
            best = int(np.argmax(means))
            if stop_on_no_improvement and means[best] - best_prev < IMPROVEMENT_EPS:
                break
            j = cands[best]
            state.add(j)
            trace.steps.append(TraceStep(len(trace.steps) + 1, j, d.names[j], means[best], folds[best],
                                         dict(zip(cands, means))))
            best_prev = means[best]
    finally:
        if executor:
            executor.shutdown()
    return trace


def automl_config(n_rows: int, n_irrelevant: int = 900, seed: int = 0, noise: float = 0.2,
                  relevant_cardinality: int = 3) -> DatasetConfig:
    """Four relevant parents, all five combination kinds over their pairs, parents dropped.

    Ternary parents keep several children informative; with binary parents
    two children determine the label and later rounds pick among near-ties.
    """
    base = base_config(n_rows=n_rows, n_irrelevant=n_irrelevant, relevant_cardinality=relevant_cardinality, seed=seed)
    return interaction_config(base, ALL_KINDS, noise, layout="drop_parents")


def run_automl_experiment(
    sizes: Sequence[int],
    seed: int = 0,
    n_irrelevant: int = 900,
    budget: int = 15,
    noise: float = 0.2,
    relevant_cardinality: int = 3,
    threads: int = 1,
    retrain: bool = True,
    train_cfg: Optional[TrainConfig] = None,
) -> tuple[dict[int, EvolutionTrace], MetricsReport]:
    """Forward selection per dataset size, then tuned linear/FM refits on each selected prefix.

    Prefix rows in the report carry ``config_id`` ``n{size}_top{L}``.
    """
    if not sizes:
        raise UsageError("sizes must be non-empty")
    traces: dict[int, EvolutionTrace] = {}
    report = MetricsReport(meta={"seed": seed, "sizes": list(sizes), "n_irrelevant": n_irrelevant,
                                 "budget": budget, "noise": noise,
                                 "relevant_cardinality": relevant_cardinality})
    for size in sizes:
        d = generate_dataset(automl_config(size, n_irrelevant, seed, noise, relevant_cardinality))
        trace = forward_select(d, budget, seed=seed, threads=threads)
        traces[size] = trace
        if not retrain:
            continue
        X = encode(d)
        for L in range(1, len(trace) + 1):
            part = evaluate_design(f"n{size}_top{L}", X.fields(trace.columns[:L]), d.labels, seed, base_cfg=train_cfg)
            report.rows.extend(part.rows)
    return traces, report
