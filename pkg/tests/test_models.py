import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catsynth.benchmark import (
    INTERACTION_CONFIGS,
    base_config,
    interaction_config,
    pairwise_combinations,
    run_interaction_benchmark,
)
from catsynth.dataset import MISSING, ColumnMeta, Dataset
from catsynth.errors import ConfigError, UsageError
from catsynth.generator import generate_dataset
from catsynth.metrics import accuracy_and_logloss, auc, log_loss
from catsynth.models import (
    FmModel,
    LinearModel,
    TrainConfig,
    _fm_score,
    decision_scores,
    encode,
    fm_row_grad,
    linear_row_grad,
    predict_proba,
    train_fm,
    train_linear,
)
from catsynth.splits import stratified_split


def table(*cols):
    cols = [np.asarray(c, dtype=np.int64) for c in cols]
    meta = [ColumnMeta(f"c{j}", int(c.max()) + 1) for j, c in enumerate(cols)]
    return Dataset(tuple(cols), tuple(meta), cols[0].size)


def random_design(rng, n, fields, card):
    return encode(table(*[rng.integers(0, card, n) for _ in range(fields)]))


# --- encoding ------------------------------------------------------------------


def test_encode_binary_column():
    X = encode(table([0, 1, 1, 0]))
    assert X.n_dims == 2 and X.indices.shape == (4, 1)


def test_encode_one_active_per_column():
    X = encode(table([0, 2, 1], [5, 5, 1], [0, 0, 0]))
    assert X.indices.shape == (3, 3)
    # fields occupy disjoint dimension ranges
    assert len(set(X.indices[:, 0]) & set(X.indices[:, 1])) == 0


def test_encode_missing_gets_own_dimension():
    X = encode(table([0, MISSING, 1]))
    assert X.n_dims == 3 and len(set(X.indices[:, 0])) == 3


def test_hashed_encoding_collisions():
    # an active slot collides when another field of the same row hashes to the same dimension
    d = generate_dataset(base_config(n_rows=500, n_irrelevant=750))
    hashed = encode(d, hashed_dim=1 << 18)
    collided = 0
    for row in hashed.indices:
        _, counts = np.unique(row, return_counts=True)
        collided += int(counts[counts > 1].sum())
    assert collided / hashed.indices.size < 0.01
    with pytest.raises(ConfigError):
        encode(d, hashed_dim=10)


# --- FM scoring and gradients --------------------------------------------------


def naive_fm(row, bias, w, v):
    s = bias + sum(w[i] for i in row)
    for a in range(len(row)):
        for b in range(a + 1, len(row)):
            s += float(v[row[a]] @ v[row[b]])
    return s


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 10))
def test_fm_fast_score_equals_pairwise(seed, n_fields, k):
    rng = np.random.default_rng(seed)
    n_dims = 30
    w, v = rng.normal(size=n_dims), rng.normal(size=(n_dims, k))
    row = rng.integers(0, n_dims, n_fields)
    assert _fm_score(row, 0.3, w, v) == pytest.approx(naive_fm(row, 0.3, w, v), abs=1e-9)


def test_fm_with_zero_factors_is_linear():
    rng = np.random.default_rng(0)
    X = random_design(rng, 50, 4, 5)
    w = rng.normal(size=X.n_dims)
    fm = FmModel(0.2, w, np.zeros((X.n_dims, 1)))
    lin = LinearModel(0.2, w)
    np.testing.assert_allclose(decision_scores(fm, X), decision_scores(lin, X), atol=1e-12)


def _logloss_of(score, y):
    p = 1 / (1 + math.exp(-score))
    return -(y * math.log(p) + (1 - y) * math.log(1 - p))


def _rel_close(a, b, tol=1e-5):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_linear_gradient_finite_difference():
    rng = np.random.default_rng(1)
    eps, l2 = 1e-6, 0.01
    for _ in range(50):
        row = rng.choice(20, 5, replace=False)
        w, b, y = rng.normal(size=20), rng.normal(), int(rng.integers(2))

        def obj(b, w):
            return _logloss_of(b + w[row].sum(), y) + 0.5 * l2 * (w[row] ** 2).sum()

        gb, gw = linear_row_grad(row, y, b, w, l2)
        assert _rel_close(gb, (obj(b + eps, w) - obj(b - eps, w)) / (2 * eps))
        a = int(rng.integers(5))
        wp, wm = w.copy(), w.copy()
        wp[row[a]] += eps
        wm[row[a]] -= eps
        assert _rel_close(gw[a], (obj(b, wp) - obj(b, wm)) / (2 * eps))


def test_fm_gradient_finite_difference():
    rng = np.random.default_rng(2)
    eps, l2 = 1e-6, 0.01
    for _ in range(50):
        row = rng.choice(20, 5, replace=False)
        w, v, b, y = rng.normal(size=20), rng.normal(0, 0.5, (20, 4)), rng.normal(), int(rng.integers(2))

        def obj(w, v):
            reg = 0.5 * l2 * ((w[row] ** 2).sum() + (v[row] ** 2).sum())
            return _logloss_of(naive_fm(row, b, w, v), y) + reg

        _, gw, gv = fm_row_grad(row, y, b, w, v, l2)
        a, f = int(rng.integers(5)), int(rng.integers(4))
        vp, vm = v.copy(), v.copy()
        vp[row[a], f] += eps
        vm[row[a], f] -= eps
        assert _rel_close(gv[a, f], (obj(w, vp) - obj(w, vm)) / (2 * eps))
        wp, wm = w.copy(), w.copy()
        wp[row[a]] += eps
        wm[row[a]] -= eps
        assert _rel_close(gw[a], (obj(wp, v) - obj(wm, v)) / (2 * eps))


# --- training ------------------------------------------------------------------


def test_separable_single_column():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 6, 2000)
    y = (x >= 3).astype(np.int64)
    X = encode(table(x))
    model = train_linear(X, y, TrainConfig(learning_rate=0.1, epochs=10))
    acc, _ = accuracy_and_logloss(predict_proba(model, X), y)
    assert acc >= 0.99


def test_training_is_deterministic():
    rng = np.random.default_rng(4)
    X = random_design(rng, 300, 5, 4)
    y = rng.integers(0, 2, 300)
    cfg = TrainConfig(seed=9, epochs=2)
    a, b = train_fm(X, y, cfg), train_fm(X, y, cfg)
    np.testing.assert_array_equal(a.factors, b.factors)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_rows_argument_equals_subset_copy():
    rng = np.random.default_rng(5)
    X = random_design(rng, 200, 4, 6)
    y = rng.integers(0, 2, 200)
    rows = np.arange(0, 200, 3)
    cfg = TrainConfig(seed=2)
    a = train_linear(X, y, cfg, rows)
    b = train_linear(X.rows(rows), y[rows], cfg)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_non_binary_labels_rejected():
    X = encode(table([0, 1, 2]))
    with pytest.raises(UsageError):
        train_linear(X, np.array([0, 1, 2]), TrainConfig())


def test_label_shuffle_control():
    aucs = {"linear": [], "fm": []}
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = random_design(rng, 2000, 6, 10)
        y = rng.integers(0, 2, 2000)
        tr, te = stratified_split(y, 5, seed)
        for kind, fit in (("linear", train_linear), ("fm", train_fm)):
            m = fit(X, y, TrainConfig(seed=seed), tr)
            aucs[kind].append(auc(predict_proba(m, X, te), y[te]))
    for vals in aucs.values():
        assert 0.45 <= np.mean(vals) <= 0.55


def test_predict_proba_basics():
    rng = np.random.default_rng(6)
    X = random_design(rng, 100, 3, 4)
    assert (predict_proba(LinearModel.zeros(X.n_dims), X) == 0.5).all()
    sat = LinearModel(40.0, np.zeros(X.n_dims))
    assert abs(predict_proba(sat, X)[0] - 1.0) < 1e-15
    m = LinearModel(0.1, rng.normal(size=X.n_dims))
    manual = np.array([0.1 + m.weights[r].sum() for r in X.indices])
    np.testing.assert_allclose(predict_proba(m, X), 1 / (1 + np.exp(-manual)), atol=1e-12)
    with pytest.raises(UsageError):
        predict_proba(LinearModel.zeros(X.n_dims + 1), X)


# --- metrics -------------------------------------------------------------------


def auc_oracle(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_oracle_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = rng.integers(0, 20, 200).astype(float)
        y = rng.integers(0, 2, 200)
        assert abs(auc(s, y) - auc_oracle(s, y)) <= 1e-12


def test_auc_edges():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.5] * 4, [0, 1, 0, 1]) == 0.5
    with pytest.raises(UsageError):
        auc([0.1, 0.2], [1, 1])


def test_accuracy_and_logloss():
    acc, ll = accuracy_and_logloss(np.array([0.0, 1.0, 1.0]), np.array([0, 1, 1]))
    assert acc == 1.0 and ll < 1e-14
    assert accuracy_and_logloss(np.full(4, 0.5), np.array([0, 1, 0, 1]))[1] == pytest.approx(math.log(2))
    rng = np.random.default_rng(8)
    p, y = rng.random(10), rng.integers(0, 2, 10)
    manual = -sum(math.log(pi) if yi else math.log(1 - pi) for pi, yi in zip(p, y)) / 10
    assert log_loss(p, y) == pytest.approx(manual, abs=1e-12)
    assert accuracy_and_logloss(p, y)[0] == sum((pi >= 0.5) == yi for pi, yi in zip(p, y)) / 10


# --- interaction benchmark -----------------------------------------------------


def test_eleven_configs():
    assert len(INTERACTION_CONFIGS) == 11
    assert INTERACTION_CONFIGS[3] == ("xor",)
    assert len(INTERACTION_CONFIGS[11]) == 5


def test_child_naming():
    names = [c.new_name for c in pairwise_combinations((0, 1, 2, 3), ("or",))]
    assert names == [f"OR{i}" for i in range(6)]


def test_interaction_config_drops_children():
    cfg = interaction_config(base_config(n_rows=100, n_irrelevant=3), ("and", "xor"))
    d = generate_dataset(cfg)
    assert d.names == ["REL0", "REL1", "REL2", "REL3", "IRR0", "IRR1", "IRR2"]
    assert cfg.noise[0].p == 0.2


def test_small_benchmark_report():
    rep = run_interaction_benchmark(base_config(n_rows=1000, n_irrelevant=5), seed=1,
                                    configs={3: ("xor",), 6: ("sum_of_squares",)}, keep_predictions=True)
    assert len(rep.rows) == 4
    assert rep.to_csv().splitlines()[0].startswith("config_id,model,auc,accuracy,log_loss")
    # AUC is reproducible from the dumped predictions
    for p in rep.predictions:
        assert auc(p["probs"], p["labels"]) == rep.get(p["config_id"], p["model"]).auc


def test_xor_needs_interactions():
    rep = run_interaction_benchmark(base_config(n_rows=10_000, n_irrelevant=20), seed=0, configs={3: ("xor",)})
    lin, fm = rep.get("3", "linear"), rep.get("3", "fm")
    assert abs(lin.auc - 0.5) < 0.05
    assert fm.auc - lin.auc >= 0.10
