import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from helpers import pooled_chisquare, spearman

from catsynth import (
    CombinationSpec,
    CorrelationSpec,
    DatasetConfig,
    Distribution,
    FeatureSpec,
    NoiseSpec,
    TargetSpec,
)
from catsynth.clustering import kmeans_labels
from catsynth.dataset import MISSING, ColumnMeta, Dataset, read_dataset, sidecar_dict, to_csv_bytes
from catsynth.errors import ConfigError, GenerationError
from catsynth.generator import (
    AugmentSpec,
    apply_combination,
    apply_correlation,
    augment_dataset,
    distribution_pmf,
    drop_features,
    equal_frequency_bins,
    generate_dataset,
    generate_target,
    inject_categorical_noise,
    inject_missing,
    median_split,
    regenerate,
    sample_feature,
)


def table(*cols, cards=None):
    cols = [np.asarray(c, dtype=np.int64) for c in cols]
    cards = cards or [int(c.max()) + 1 for c in cols]
    meta = [ColumnMeta(f"c{j}", k) for j, k in enumerate(cards)]
    return Dataset(tuple(cols), tuple(meta), cols[0].size)


def uniform_table(n, cards, seed=0):
    rng = np.random.default_rng(seed)
    return table(*[rng.integers(0, c, n) for c in cards], cards=list(cards))


# --- distributions -----------------------------------------------------------


def test_single_category_is_all_zeros():
    assert not sample_feature(FeatureSpec("a", 1), 100, 5).any()


def test_longtail_code_zero_frequency():
    spec = FeatureSpec("a", 100, Distribution("longtail", 1.5))
    p0 = 1.0 / sum(k ** -1.5 for k in range(1, 101))
    x = sample_feature(spec, 100_000, 0)
    assert abs(np.mean(x == 0) / p0 - 1) < 0.10
    assert distribution_pmf(spec)[0] == pytest.approx(p0, rel=1e-12)


def _gaussian_pmf_oracle(c, comps):
    # independent: integrate each component over the code's rounding cell with scipy
    out = np.zeros(c)
    for k in range(c):
        lo = -np.inf if k == 0 else k - 0.5
        hi = np.inf if k == c - 1 else k + 0.5
        for mu, sd, w in comps:
            out[k] += w * (stats.norm.cdf(hi, mu, sd) - stats.norm.cdf(lo, mu, sd))
    return out


@pytest.mark.parametrize("c", [2, 10, 37])
def test_gaussian_pmfs_match_scipy_oracle(c):
    normal = distribution_pmf(FeatureSpec("a", c, Distribution("normal")))
    bimodal = distribution_pmf(FeatureSpec("a", c, Distribution("bimodal")))
    np.testing.assert_allclose(normal, _gaussian_pmf_oracle(c, [((c - 1) / 2, c / 6, 1.0)]), atol=1e-12)
    np.testing.assert_allclose(bimodal, _gaussian_pmf_oracle(c, [(c / 4, c / 10, 0.5), (3 * c / 4, c / 10, 0.5)]), atol=1e-12)


@pytest.mark.parametrize("kind", ["uniform", "normal", "longtail", "bimodal"])
@pytest.mark.parametrize("c", [10, 100, 1000])
def test_sample_matches_pmf(kind, c):
    spec = FeatureSpec("a", c, Distribution(kind))
    pvals = [pooled_chisquare(np.bincount(sample_feature(spec, 100_000, s), minlength=c), distribution_pmf(spec))
             for s in range(5)]
    assert sum(p > 0.001 for p in pvals) >= 4


def test_custom_pmf_sampling():
    spec = FeatureSpec("a", 3, Distribution("custom", pmf=(1, 0, 3)))
    x = sample_feature(spec, 40_000, 2)
    assert not (x == 1).any()
    assert np.mean(x == 2) == pytest.approx(0.75, abs=0.01)


# --- whole pipeline -------------------------------------------------------------


def wide_config(seed=0, n_irrelevant=750, n_rows=10_000):
    feats = [FeatureSpec(f"REL{i}", 4) for i in range(4)]
    feats += [FeatureSpec(f"IRR{i}", 50, Distribution("longtail")) for i in range(n_irrelevant)]
    return DatasetConfig(n_rows, tuple(feats), target=TargetSpec("nonlinear", (0, 1, 2, 3)), seed=seed)


def test_754_column_dataset():
    d = generate_dataset(wide_config())
    assert d.n_columns == 754 and d.n_rows == 10_000
    assert abs(int(d.labels.sum()) - 5000) <= 1


def test_determinism_and_seed_sensitivity():
    cfg = wide_config(n_irrelevant=20, n_rows=500)
    a, b = to_csv_bytes(generate_dataset(cfg)), to_csv_bytes(generate_dataset(cfg))
    assert a == b
    other = generate_dataset(DatasetConfig(**{**cfg.__dict__, "seed": 1}))
    assert to_csv_bytes(other) != a


def test_thread_count_does_not_change_output():
    cfg = wide_config(n_irrelevant=30, n_rows=300)
    assert to_csv_bytes(generate_dataset(cfg, threads=1)) == to_csv_bytes(generate_dataset(cfg, threads=4))


def test_column_seeds_do_not_depend_on_neighbours():
    # column 1's values are the same whether or not later columns exist
    a = generate_dataset(DatasetConfig(200, (FeatureSpec("a", 9), FeatureSpec("b", 9)), seed=4))
    b = generate_dataset(DatasetConfig(200, (FeatureSpec("a", 9), FeatureSpec("b", 9), FeatureSpec("c", 3)), seed=4))
    np.testing.assert_array_equal(a.columns[1], b.columns[1])


def test_stage_error_names_stage_and_column():
    cfg = DatasetConfig(50, (FeatureSpec("a", 1), FeatureSpec("b", 3)),
                        correlations=(CorrelationSpec(0, 0.5, 4, "corr_a"),))
    with pytest.raises(ConfigError, match="correlation.*corr_a"):
        generate_dataset(cfg)


def test_fig1_dual_targets():
    cards = (5, 12, 40, 8, 3, 25, 100, 16, 6)
    cfg = DatasetConfig(
        10_000,
        tuple(FeatureSpec(f"f{i}", c) for i, c in enumerate(cards)),
        target=TargetSpec("clustering", tuple(range(9)), k=2),
        aux_targets=(TargetSpec("custom", (), function="majority_above_mid", name="label_custom"),),
        seed=7,
    )
    d = generate_dataset(cfg)
    assert d.n_columns == 9
    assert set(np.unique(d.labels)) == {0, 1}
    assert set(np.unique(d.aux_labels["label_custom"])) <= {0, 1}
    header = to_csv_bytes(d).split(b"\n", 1)[0].decode()
    assert header.split(",")[-2:] == ["label_custom", "label"]


@settings(max_examples=25, deadline=None)
@given(
    cards=st.lists(st.integers(1, 40), min_size=2, max_size=5),
    kinds=st.lists(st.sampled_from(["and", "or", "xor", "sum_of_squares", "square_of_sums"]), max_size=3),
    p=st.floats(0, 1),
    seed=st.integers(0, 2**64 - 1),
)
def test_domain_safety(cards, kinds, p, seed):
    feats = tuple(FeatureSpec(f"f{i}", c) for i, c in enumerate(cards))
    combos = tuple(CombinationSpec(k, (0, 1), f"k{i}") for i, k in enumerate(kinds))
    d = generate_dataset(DatasetConfig(64, feats, combos, noise=(NoiseSpec(p),), seed=seed))
    for col, m in zip(d.columns, d.meta):
        assert col.min() >= 0 and col.max() < m.cardinality


# --- combinations --------------------------------------------------------------


def test_combination_arithmetic():
    d = table([5, 3], [3, 4])
    assert apply_combination(d, CombinationSpec("xor", (0, 1), "x")).columns[-1][0] == 6
    assert list(apply_combination(d, CombinationSpec("sum_of_squares", (0, 1), "x")).columns[-1]) == [34, 25]
    assert list(apply_combination(d, CombinationSpec("square_of_sums", (0, 1), "x")).columns[-1]) == [64, 49]


@pytest.mark.parametrize("kind, op", [("and", np.bitwise_and), ("or", np.bitwise_or), ("xor", np.bitwise_xor)])
def test_bitwise_child_matches_exhaustive_convolution(kind, op):
    d = uniform_table(100_000, (8, 8), seed=3)
    child = apply_combination(d, CombinationSpec(kind, (0, 1), "x")).columns[-1]
    pmf = np.zeros(8)
    for a, b in itertools.product(range(8), repeat=2):
        pmf[op(a, b)] += 1 / 64
    assert pooled_chisquare(np.bincount(child, minlength=8), pmf) > 0.001


def test_missing_parent_propagates():
    d = table([1, MISSING, 2], [1, 1, MISSING], cards=[3, 3])
    child = apply_combination(d, CombinationSpec("or", (0, 1), "x")).columns[-1]
    assert list(child) == [1, MISSING, MISSING]


def test_overflow_names_row():
    big = 4_000_000_000
    d = table([1, big], [1, big], cards=[big + 1, big + 1])
    with pytest.raises(GenerationError, match="row 1"):
        apply_combination(d, CombinationSpec("square_of_sums", (0, 1), "x"))


def test_custom_combination_by_name():
    d = table([1, 7, 3], [4, 2, 3])
    child = apply_combination(d, CombinationSpec("custom", (0, 1), "m", function="row_max"))
    assert list(child.columns[-1]) == [4, 7, 3]
    assert child.meta[-1].cardinality == 8


# --- correlation ---------------------------------------------------------------


def test_rho_one_is_monotone_recoding():
    d = uniform_table(5000, (20,), seed=1)
    out = apply_correlation(d, CorrelationSpec(0, 1.0, 20, "y"), seed=9).columns[-1]
    np.testing.assert_array_equal(out, d.columns[0])
    assert spearman(out, d.columns[0]) == 1.0


@pytest.mark.parametrize("rho, lo, hi", [(0.0, -0.05, 0.05), (0.8, 0.75, 0.85)])
def test_correlation_strength(rho, lo, hi):
    vals = []
    for s in range(20):
        d = uniform_table(10_000, (50,), seed=s)
        out = apply_correlation(d, CorrelationSpec(0, rho, 50, "y"), seed=100 + s).columns[-1]
        vals.append(spearman(out, d.columns[0]))
    assert lo <= np.mean(vals) <= hi
    if rho == 0:
        assert max(abs(v) for v in vals) < 0.05


def test_constant_source_rejected():
    with pytest.raises(ConfigError):
        apply_correlation(table([2, 2, 2], cards=[3]), CorrelationSpec(0, 0.5, 2, "y"), 0)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60), st.integers(2, 8))
def test_equal_frequency_bins_monotone(y, n_bins):
    y = np.array(y, dtype=np.float64)
    b = equal_frequency_bins(y, n_bins)
    order = np.argsort(y, kind="stable")
    assert (np.diff(b[order]) >= 0).all()
    assert b.max() < n_bins
    for v in np.unique(y):
        assert len(set(b[y == v])) == 1


# --- targets -------------------------------------------------------------------


def test_nonlinear_target_balanced():
    d = uniform_table(10_000, (16, 16, 16, 16), seed=2)
    labels = generate_target(d, TargetSpec("nonlinear", (0, 1, 2, 3)), 5)
    assert abs(int(labels.sum()) - 5000) <= 1


@settings(deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=200), st.integers(0, 1000))
def test_median_split_balance(score, seed):
    score = np.array(score, dtype=np.float64)
    if np.all(score == score[0]):
        return
    y = median_split(score, np.random.default_rng(seed))
    n = score.size
    assert y.sum() == n // 2
    # never a 0 strictly above a 1
    assert score[y == 0].max() <= score[y == 1].min()


def test_constant_linear_score_rejected():
    d = table([1, 1, 1, 1], [2, 2, 2, 2], cards=[3, 3])
    with pytest.raises(ConfigError):
        generate_target(d, TargetSpec("linear", (0, 1)), 0)


def test_nonlinear_needs_four_columns():
    with pytest.raises(ConfigError):
        generate_target(uniform_table(20, (3, 3, 3)), TargetSpec("nonlinear", (0, 1, 2)), 0)


def test_kmeans_separable_blobs():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 0.1, (50, 2)), rng.normal(5, 0.1, (50, 2))])
    lab = kmeans_labels(x, 2, 3)
    truth = np.repeat([0, 1], 50)
    assert (lab == truth).all() or (lab == 1 - truth).all()


def test_kmeans_one_point_per_cluster():
    x = np.arange(6, dtype=float)[:, None] * 10
    assert sorted(kmeans_labels(x, 6, 0)) == list(range(6))


def test_kmeans_too_many_clusters():
    with pytest.raises(ConfigError):
        kmeans_labels(np.zeros((5, 2)), 2, 0)


def _wcss(x, labels):
    return sum(((x[labels == c] - x[labels == c].mean(0)) ** 2).sum() for c in np.unique(labels))


def test_kmeans_beats_random_assignments():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 2))
    best = _wcss(x, kmeans_labels(x, 3, 4))
    baseline = min(_wcss(x, rng.integers(0, 3, 300)) for _ in range(1000))
    assert best <= baseline


# --- noise and drop ------------------------------------------------------------


def test_categorical_noise_edges():
    d = uniform_table(1000, (5,))
    assert inject_categorical_noise(d, NoiseSpec(0.0), 1).columns[0].tolist() == d.columns[0].tolist()
    one = table(np.zeros(100), cards=[1])
    assert not inject_categorical_noise(one, NoiseSpec(1.0), 1).columns[0].any()


def test_categorical_noise_rate():
    d = uniform_table(100_000, (100,), seed=4)
    out = inject_categorical_noise(d, NoiseSpec(0.2), 8)
    assert np.mean(out.columns[0] != d.columns[0]) == pytest.approx(0.2 * 0.99, abs=0.01)
    assert out.meta[0].noise == ("categorical",)


def test_missing_injection():
    d = uniform_table(100_000, (10,), seed=5)
    assert (inject_missing(d, NoiseSpec(0.0, "missing"), 0).columns[0] == d.columns[0]).all()
    assert (inject_missing(d, NoiseSpec(1.0, "missing"), 0).columns[0] == MISSING).all()
    frac = np.mean(inject_missing(d, NoiseSpec(0.1, "missing"), 0).columns[0] == MISSING)
    assert 0.094 <= frac <= 0.106


def test_noise_leaves_missing_cells_alone():
    d = table([MISSING] * 50 + [1] * 50, cards=[4])
    out = inject_categorical_noise(d, NoiseSpec(1.0), 0)
    assert (out.columns[0][:50] == MISSING).all()


def test_drop():
    d = uniform_table(10, (3, 4, 5))
    assert drop_features(d, []) == d
    out = drop_features(d, [0])
    assert out.names == ["c1", "c2"]
    np.testing.assert_array_equal(out.columns[0], d.columns[1])
    with pytest.raises(ConfigError):
        drop_features(d, [3])


def test_drop_parents_keeps_children_and_irrelevant():
    cfg = DatasetConfig(
        100,
        (FeatureSpec("R0", 2), FeatureSpec("R1", 2), FeatureSpec("IRR0", 9)),
        combinations=(CombinationSpec("xor", (0, 1), "XOR0"),),
        drop_after_combine=(0, 1),
    )
    assert generate_dataset(cfg).names == ["IRR0", "XOR0"]


# --- files and lineage ---------------------------------------------------------


def test_csv_sidecar_roundtrip(tmp_path):
    cfg = wide_config(n_irrelevant=5, n_rows=200)
    d = generate_dataset(cfg)
    data = to_csv_bytes(d)
    path = tmp_path / "d.csv"
    path.write_bytes(data)
    side = sidecar_dict(d, cfg.to_dict(), data)
    back, _ = read_dataset(str(path), side)
    assert to_csv_bytes(back) == data
    assert to_csv_bytes(regenerate(side)) == data


def test_sidecar_mismatch_detected(tmp_path):
    d = generate_dataset(wide_config(n_irrelevant=2, n_rows=20))
    data = to_csv_bytes(d)
    path = tmp_path / "d.csv"
    path.write_bytes(data)
    side = sidecar_dict(d, None, data)
    with pytest.raises(ConfigError):
        read_dataset(str(path), {**side, "n_rows": 21})
    with pytest.raises(ConfigError):
        read_dataset(str(path), {**side, "columns": side["columns"][1:]})


def test_augment_empty_and_xor():
    d = generate_dataset(wide_config(n_irrelevant=3, n_rows=100))
    assert to_csv_bytes(augment_dataset(d, AugmentSpec(), 1)) == to_csv_bytes(d)
    spec = AugmentSpec(combinations=(CombinationSpec("xor", (0, 1), "x01"),), drop=(0, 1))
    assert augment_dataset(d, spec, 1).n_columns == d.n_columns - 1
