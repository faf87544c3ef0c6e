"""Seeded synthesis of categorical datasets and the augmentation operators.

Each stage draws from its own stream, seeded by
``derive_column_seed(master, column_index, stage)``, so the output does not
depend on the order in which columns are produced.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .clustering import kmeans_labels
from .config import (
    CombinationSpec,
    CorrelationSpec,
    DatasetConfig,
    FeatureSpec,
    NoiseSpec,
    TargetSpec,
    _get,
    _int_list,
    _spec_list,
    get_function,
    register_function,
)
from .dataset import MISSING, ColumnMeta, Dataset
from .errors import CatSynthError, ConfigError, GenerationError
from .hashing import derive_column_seed

STAGE_FEATURE = 0
STAGE_CORRELATION = 1
STAGE_COMBINATION = 2
STAGE_TARGET = 3
STAGE_NOISE = 4
STAGE_AUGMENT = 5

_INT64_MAX = (1 << 63) - 1


def distribution_pmf(spec: FeatureSpec) -> np.ndarray:
    """Exact probability of each code ``0..c-1`` under ``spec``."""
    c = spec.cardinality
    dist = spec.distribution
    k = np.arange(c, dtype=np.float64)
    if c == 1:
        return np.ones(1)
    if dist.kind == "uniform":
        return np.full(c, 1.0 / c)
    if dist.kind == "longtail":
        w = (k + 1.0) ** (-dist.exponent)
        return w / w.sum()
    if dist.kind == "custom":
        w = np.asarray(dist.pmf, dtype=np.float64)
        return w / w.sum()
    if dist.kind == "normal":
        return _rounded_gaussian_pmf(c, [((c - 1) / 2.0, c / 6.0, 1.0)])
    if dist.kind == "bimodal":
        return _rounded_gaussian_pmf(c, [(c / 4.0, c / 10.0, 0.5), (3 * c / 4.0, c / 10.0, 0.5)])
    raise ConfigError(f"unknown distribution {dist.kind!r}")


def _rounded_gaussian_pmf(c, components):
    # rint then clip: code k collects (k-0.5, k+0.5], the end codes absorb the tails
    edges = np.arange(c + 1, dtype=np.float64) - 0.5
    edges[0], edges[-1] = -np.inf, np.inf
    pmf = np.zeros(c)
    for mu, sigma, weight in components:
        pmf += weight * np.diff(ndtr((edges - mu) / sigma))
    return pmf


def _inverse_cdf(pmf, rng, n):
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    codes = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(codes, len(pmf) - 1)


def sample_feature(spec: FeatureSpec, n_rows: int, seed: int) -> np.ndarray:
    spec.validate()
    c = spec.cardinality
    if n_rows < 1:
        raise ConfigError(f"n_rows must be >= 1, got {n_rows}")
    rng = np.random.default_rng(seed)
    kind = spec.distribution.kind
    if c == 1:
        return np.zeros(n_rows, dtype=np.int64)
    if kind == "uniform":
        return rng.integers(0, c, n_rows, dtype=np.int64)
    if kind == "normal":
        x = rng.normal((c - 1) / 2.0, c / 6.0, n_rows)
    elif kind == "bimodal":
        first = rng.random(n_rows) < 0.5
        x = np.where(first, rng.normal(c / 4.0, c / 10.0, n_rows), rng.normal(3 * c / 4.0, c / 10.0, n_rows))
    else:  # longtail, custom
        return _inverse_cdf(distribution_pmf(spec), rng, n_rows).astype(np.int64)
    return np.clip(np.rint(x), 0, c - 1).astype(np.int64)


def _pow2_ceil(c: int) -> int:
    return 1 << max(int(c) - 1, 0).bit_length()


def _combination_cardinality(kind, parent_cards, values):
    if kind == "and":
        return min(parent_cards)
    if kind in ("or", "xor"):
        return _pow2_ceil(max(parent_cards))
    if kind == "sum_of_squares":
        return sum((c - 1) ** 2 for c in parent_cards) + 1
    if kind == "square_of_sums":
        return sum(c - 1 for c in parent_cards) ** 2 + 1
    observed = values[values != MISSING]
    return int(observed.max()) + 1 if observed.size else 1


def _checked_power_sum(parents: np.ndarray, square_each: bool) -> np.ndarray:
    q = parents.shape[1]
    max_abs = int(np.abs(parents).max()) if parents.size else 0
    bound = q * max_abs * max_abs if square_each else (q * max_abs) ** 2
    if bound <= _INT64_MAX:
        if square_each:
            return (parents * parents).sum(axis=1)
        s = parents.sum(axis=1)
        return s * s
    # exact arbitrary-precision path, then range-check row by row
    obj = parents.astype(object)
    out = (obj * obj).sum(axis=1) if square_each else obj.sum(axis=1) ** 2
    for row, v in enumerate(out):
        if v > _INT64_MAX:
            raise GenerationError(f"combination overflows signed 64-bit at row {row}")
    return out.astype(np.int64)


def apply_combination(d: Dataset, spec: CombinationSpec, seed: int = 0) -> Dataset:
    """Append one column combining ``spec.parents``.

    ``and``/``or``/``xor`` are bitwise over the integer codes. A missing parent
    cell makes the child cell missing. ``seed`` is accepted for interface
    symmetry; the built-in kinds are deterministic.
    """
    for p in spec.parents:
        if not 0 <= p < d.n_columns:
            raise ConfigError(f"parent {p} out of range (have {d.n_columns} columns)", "parents")
    if len(set(spec.parents)) != len(spec.parents) or len(spec.parents) < 2:
        raise ConfigError("need at least 2 distinct parents", "parents")
    parents = d.matrix(spec.parents)
    missing = (parents == MISSING).any(axis=1)
    clean = np.where(parents == MISSING, 0, parents)
    kind = spec.kind
    if kind == "and":
        values = np.bitwise_and.reduce(clean, axis=1)
    elif kind == "or":
        values = np.bitwise_or.reduce(clean, axis=1)
    elif kind == "xor":
        values = np.bitwise_xor.reduce(clean, axis=1)
    elif kind == "sum_of_squares":
        values = _checked_power_sum(clean, square_each=True)
    elif kind == "square_of_sums":
        values = _checked_power_sum(clean, square_each=False)
    elif kind == "custom":
        fn = get_function(spec.function, "function")
        values = np.asarray(fn(parents), dtype=np.int64).reshape(-1)
        if values.shape != (d.n_rows,):
            raise GenerationError(f"custom combination {spec.function!r} returned shape {values.shape}")
        bad = np.flatnonzero(values < MISSING)
        if bad.size:
            raise GenerationError(f"custom combination {spec.function!r} returned a negative code at row {bad[0]}")
    else:
        raise ConfigError(f"unknown combination kind {kind!r}", "kind")
    values = np.where(missing, MISSING, values).astype(np.int64)
    cards = [d.meta[p].cardinality for p in spec.parents]
    meta = ColumnMeta(
        spec.new_name,
        _combination_cardinality(kind, cards, values),
        "combination",
        {"kind": kind, "parents": [d.meta[p].name for p in spec.parents], **({"function": spec.function} if spec.function else {})},
    )
    return d.with_columns((*d.columns, values), (*d.meta, meta))


def equal_frequency_bins(y: np.ndarray, n_bins: int) -> np.ndarray:
    """Quantize ``y`` into at most ``n_bins`` equally populated, order-preserving bins.

    Equal values always share a bin. With at most ``n_bins`` distinct values
    each value gets its own bin, so the coding is a monotone bijection.
    """
    uniq, inverse = np.unique(y, return_inverse=True)
    if len(uniq) <= n_bins:
        return inverse.astype(np.int64)
    s = np.sort(y)
    edges = s[(np.arange(1, n_bins) * len(y)) // n_bins]
    return np.searchsorted(edges, y, side="right").astype(np.int64)


def apply_correlation(d: Dataset, spec: CorrelationSpec, seed: int) -> Dataset:
    """Append a column whose ranks correlate with ``spec.source`` at roughly ``spec.rho``.

    The standardized source is rotated toward an independent Gaussian
    direction, ``y = rho*z + sqrt(1-rho^2)*eps``, and ``y`` is cut into
    ``out_cardinality`` equal-frequency bins.
    """
    if not 0 <= spec.source < d.n_columns:
        raise ConfigError(f"source {spec.source} out of range", "source")
    if not -1.0 <= spec.rho <= 1.0:
        raise ConfigError(f"rho must lie in [-1, 1], got {spec.rho}", "rho")
    if spec.out_cardinality < 2:
        raise ConfigError("out_cardinality must be >= 2", "out_cardinality")
    x = d.columns[spec.source]
    present = x != MISSING
    xv = x[present].astype(np.float64)
    if xv.size == 0 or np.all(xv == xv[0]):
        raise ConfigError(f"source column {d.meta[spec.source].name!r} is constant", "source")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(d.n_rows)[present]
    z = (xv - xv.mean()) / xv.std()
    y = spec.rho * z + np.sqrt(max(0.0, 1.0 - spec.rho * spec.rho)) * eps
    out = np.full(d.n_rows, MISSING, dtype=np.int64)
    out[present] = equal_frequency_bins(y, spec.out_cardinality)
    meta = ColumnMeta(spec.new_name, spec.out_cardinality, "correlated",
                      {"source": d.meta[spec.source].name, "rho": spec.rho})
    return d.with_columns((*d.columns, out), (*d.meta, meta))


def _standardize(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.float64)
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def median_split(score: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Label the top ``n // 2`` rows by score as 1, the rest 0.

    Rows strictly above the median are 1 and strictly below are 0; rows tied at
    the cut are ordered by a seeded random key so the classes stay balanced.
    """
    score = np.asarray(score, dtype=np.float64)
    if score.size == 0 or np.all(score == score[0]):
        raise ConfigError("decision score is constant; no median split possible")
    n = score.size
    order = np.lexsort((rng.random(n), score))
    labels = np.zeros(n, dtype=np.int64)
    labels[order[n - n // 2:]] = 1
    return labels


def nonlinear_score(x: np.ndarray) -> np.ndarray:
    """Default interaction-dependent score ``(x0 XOR x1) + x2 * x3`` over four columns."""
    x = np.asarray(x, dtype=np.int64)
    return (x[:, 0] ^ x[:, 1]).astype(np.float64) + x[:, 2].astype(np.float64) * x[:, 3]


def generate_target(d: Dataset, spec: TargetSpec, seed: int) -> np.ndarray:
    for r in spec.relevant:
        if not 0 <= r < d.n_columns:
            raise ConfigError(f"relevant column {r} out of range", "relevant")
    kind = spec.kind
    rng = np.random.default_rng(seed)
    if kind == "custom":
        fn = get_function(spec.function, "function")
        labels = np.asarray(fn(d.matrix()), dtype=np.int64).reshape(-1)
        if labels.shape != (d.n_rows,):
            raise GenerationError(f"decision function {spec.function!r} returned shape {labels.shape}")
        return labels
    relevant = list(spec.relevant) or list(range(d.n_columns))
    x = d.matrix(relevant)
    if (x == MISSING).any():
        raise ConfigError("relevant columns contain missing cells at labeling time", "relevant")
    if kind == "clustering":
        return kmeans_labels(_standardize(x), spec.k, seed)
    if kind == "linear":
        # equal-magnitude random signs: every relevant column matters equally
        w = rng.choice((-1.0, 1.0), size=x.shape[1])
        return median_split(_standardize(x) @ w, rng)
    if kind == "nonlinear":
        if len(spec.relevant) < 4:
            raise ConfigError(f"nonlinear target needs 4 relevant columns, got {len(spec.relevant)}", "relevant")
        return median_split(nonlinear_score(x[:, :4]), rng)
    raise ConfigError(f"unknown target kind {kind!r}", "kind")


def _noise_columns(d: Dataset, spec: NoiseSpec):
    cols = range(d.n_columns) if spec.columns is None else spec.columns
    for j in cols:
        if not 0 <= j < d.n_columns:
            raise ConfigError(f"column {j} out of range", "columns")
    return cols


def _mark(meta: ColumnMeta, mode: str) -> ColumnMeta:
    return meta if mode in meta.noise else ColumnMeta(meta.name, meta.cardinality, meta.origin, meta.detail, (*meta.noise, mode))


def inject_categorical_noise(d: Dataset, spec: NoiseSpec, seed: int) -> Dataset:
    """Resample each targeted, non-missing cell uniformly with probability ``p``.

    The resample may land on the original code, so the expected fraction of
    changed cells is ``p * (1 - 1/c)``.
    """
    columns, meta = list(d.columns), list(d.meta)
    for j in _noise_columns(d, spec):
        rng = np.random.default_rng(derive_column_seed(seed, j, STAGE_NOISE))
        x = columns[j]
        hit = (rng.random(d.n_rows) < spec.p) & (x != MISSING)
        fresh = rng.integers(0, meta[j].cardinality, d.n_rows, dtype=np.int64)
        columns[j] = np.where(hit, fresh, x)
        if spec.p > 0:
            meta[j] = _mark(meta[j], "categorical")
    return d.with_columns(columns, meta)


def inject_missing(d: Dataset, spec: NoiseSpec, seed: int) -> Dataset:
    columns, meta = list(d.columns), list(d.meta)
    for j in _noise_columns(d, spec):
        rng = np.random.default_rng(derive_column_seed(seed, j, STAGE_NOISE))
        columns[j] = np.where(rng.random(d.n_rows) < spec.p, MISSING, columns[j])
        if spec.p > 0:
            meta[j] = _mark(meta[j], "missing")
    return d.with_columns(columns, meta)


def apply_noise(d: Dataset, spec: NoiseSpec, seed: int) -> Dataset:
    if spec.mode == "categorical":
        return inject_categorical_noise(d, spec, seed)
    return inject_missing(d, spec, seed)


def drop_features(d: Dataset, indices: Sequence[int]) -> Dataset:
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise ConfigError("drop indices must be distinct")
    for j in indices:
        if not 0 <= j < d.n_columns:
            raise ConfigError(f"cannot drop column {j}: only {d.n_columns} columns")
    gone = set(indices)
    keep = [j for j in range(d.n_columns) if j not in gone]
    return d.with_columns([d.columns[j] for j in keep], [d.meta[j] for j in keep])


def _stage(name, where, fn, *args):
    try:
        return fn(*args)
    except CatSynthError as e:
        msg = f"stage {name} ({where}): {e}"
        if isinstance(e, ConfigError):
            raise ConfigError(msg) from e
        raise type(e)(msg) from e


def generate_dataset(config: DatasetConfig, threads: int = 1) -> Dataset:
    """Run the full pipeline: sample, correlate, combine, label, drop, add noise.

    Output is bit-identical for identical configs regardless of ``threads``.
    """
    config.validate()
    seed, n = config.seed, config.n_rows

    def sample(i):
        f = config.features[i]
        return _stage("feature", f"column {i} {f.name!r}", sample_feature, f, n, derive_column_seed(seed, i, STAGE_FEATURE))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            columns = list(pool.map(sample, range(len(config.features))))
    else:
        columns = [sample(i) for i in range(len(config.features))]
    meta = [ColumnMeta(f.name, f.cardinality, "feature", {"distribution": f.distribution.to_dict()}) for f in config.features]
    d = Dataset(tuple(columns), tuple(meta), n, seed)

    for spec in config.correlations:
        j = d.n_columns
        d = _stage("correlation", f"column {j} {spec.new_name!r}", apply_correlation, d, spec,
                   derive_column_seed(seed, j, STAGE_CORRELATION))
    for spec in config.combinations:
        j = d.n_columns
        d = _stage("combination", f"column {j} {spec.new_name!r}", apply_combination, d, spec,
                   derive_column_seed(seed, j, STAGE_COMBINATION))

    labels, aux = None, {}
    if config.target is not None:
        labels = _stage("target", config.target.name, generate_target, d, config.target,
                        derive_column_seed(seed, 0, STAGE_TARGET))
    for i, t in enumerate(config.aux_targets, start=1):
        aux[t.name] = _stage("target", t.name, generate_target, d, t, derive_column_seed(seed, i, STAGE_TARGET))
    if labels is not None or aux:
        d = d.with_labels(labels, aux)

    d = _stage("drop", "drop_after_combine", drop_features, d, config.drop_after_combine)
    for i, spec in enumerate(config.noise):
        d = _stage("noise", f"noise[{i}]", apply_noise, d, spec, derive_column_seed(seed, i, STAGE_NOISE))
    return d


@dataclass(frozen=True)
class AugmentSpec:
    """Augmentations applied to an existing dataset, in the order
    correlations, combinations, drop, noise. Indices follow the same
    conventions as :class:`DatasetConfig`."""

    correlations: tuple[CorrelationSpec, ...] = ()
    combinations: tuple[CombinationSpec, ...] = ()
    drop: tuple[int, ...] = ()
    noise: tuple[NoiseSpec, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        return cls(
            correlations=tuple(_spec_list(d, "correlations", CorrelationSpec, "")),
            combinations=tuple(_spec_list(d, "combinations", CombinationSpec, "")),
            drop=tuple(_int_list(_get(d, "drop", "", []), "drop")),
            noise=tuple(_spec_list(d, "noise", NoiseSpec, "")),
        )

    def to_dict(self) -> dict:
        return {
            "correlations": [c.to_dict() for c in self.correlations],
            "combinations": [c.to_dict() for c in self.combinations],
            "drop": list(self.drop),
            "noise": [n.to_dict() for n in self.noise],
        }

    @property
    def empty(self) -> bool:
        return not (self.correlations or self.combinations or self.drop or self.noise)


def augment_dataset(d: Dataset, spec: AugmentSpec, seed: int) -> Dataset:
    for i, c in enumerate(spec.correlations):
        j = d.n_columns
        d = _stage("correlation", f"correlations[{i}]", apply_correlation, d, c, derive_column_seed(seed, j, STAGE_CORRELATION))
    for i, c in enumerate(spec.combinations):
        j = d.n_columns
        d = _stage("combination", f"combinations[{i}]", apply_combination, d, c, derive_column_seed(seed, j, STAGE_COMBINATION))
    d = _stage("drop", "drop", drop_features, d, spec.drop)
    for i, ns in enumerate(spec.noise):
        d = _stage("noise", f"noise[{i}]", apply_noise, d, ns, derive_column_seed(seed, i, STAGE_NOISE))
    return d


def augment_seed(master_seed: int, step: int) -> int:
    """Sub-seed for the ``step``-th augmentation in a dataset's lineage."""
    return derive_column_seed(master_seed, step, STAGE_AUGMENT)


def regenerate(sidecar: dict) -> Dataset:
    """Rebuild a dataset from its sidecar: base config, then every lineage step."""
    if sidecar.get("config") is None:
        raise ConfigError("sidecar carries no generating config", "config")
    d = generate_dataset(DatasetConfig.from_dict(sidecar["config"]))
    for step in sidecar.get("lineage", []):
        d = augment_dataset(d, AugmentSpec.from_dict(step["spec"]), int(step["seed"]))
    return d


# built-in user functions, usable by name from JSON configs


@register_function("row_max")
def _row_max(parents: np.ndarray) -> np.ndarray:
    return parents.max(axis=1)


@register_function("abs_diff")
def _abs_diff(parents: np.ndarray) -> np.ndarray:
    return np.abs(parents[:, 0] - parents[:, 1])


@register_function("first_two_sum_mod3")
def _first_two_sum_mod3(rows: np.ndarray) -> np.ndarray:
    return ((rows[:, 0] + rows[:, 1]) % 3 == 0).astype(np.int64)


@register_function("majority_above_mid")
def _majority_above_mid(rows: np.ndarray) -> np.ndarray:
    mid = np.median(rows, axis=0)
    return ((rows > mid).sum(axis=1) * 2 > rows.shape[1]).astype(np.int64)
