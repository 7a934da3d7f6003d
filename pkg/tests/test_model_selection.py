import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from ztree import tree_learner
from ztree.data_model import BINARY
from ztree.errors import DataError
from ztree.model_selection import DEFAULT_GRID, auroc, rmse, tune_threshold
from ztree.tree_learner import TreeConfig


def auroc_pair_oracle(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    hits = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    return hits / (len(pos) * len(neg))


def test_auroc_examples():
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auroc([0.2, 0.9, 0.1, 0.8], [0, 1, 0, 1]) == 1.0
    with pytest.raises(DataError):
        auroc([0.9, 0.8], [1, 1])


@pytest.mark.parametrize("seed", range(10))
def test_auroc_matches_pair_counting(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(4, 50))
    labels = r.integers(0, 2, n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    scores = np.round(r.uniform(0, 1, n), 2)  # rounding forces some ties
    assert auroc(scores, labels) == pytest.approx(
        auroc_pair_oracle(scores, labels), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 64), st.integers(0, 1)),
                min_size=4, max_size=30))
def test_auroc_monotone_transform_invariant(pairs):
    # lattice scores keep ties exact under the transforms below
    scores = np.array([s for s, _ in pairs]) / 64.0
    labels = np.array([l for _, l in pairs])
    if labels.min() == labels.max():
        return
    base = auroc(scores, labels)
    assert auroc(3.0 * scores + 1.0, labels) == pytest.approx(base, abs=1e-12)
    assert auroc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)


def test_auroc_complement_labels_sums_to_one(rng):
    scores = rng.permutation(20).astype(float)  # tie-free
    labels = rng.integers(0, 2, 20)
    labels[0], labels[1] = 0, 1
    assert auroc(scores, labels) + auroc(scores, 1 - labels) == pytest.approx(1.0)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355339059327378, abs=1e-12)
    assert rmse([5.0], [3.0]) == 2.0
    with pytest.raises(DataError):
        rmse([1.0], [1.0, 2.0])


def test_rmse_symmetric(rng):
    a, b = rng.normal(size=30), rng.normal(size=30)
    assert rmse(a, b) == rmse(b, a)


# ---------------------------------------------------------------------------
# tune_threshold


def planted(n, seed, effect=1.0):
    r = np.random.default_rng(seed)
    cols = {f"x{i}": r.uniform(0, 1, n) for i in range(4)}
    y = r.normal(size=n) + effect * (cols["x0"] > 0.5)
    return make_dataset(cols, y)


def test_default_grid_is_the_fifteen_point_grid():
    assert DEFAULT_GRID == tuple(pytest.approx(v) for v in
                                 (0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6,
                                  1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0))
    assert len(DEFAULT_GRID) == 15


def test_single_element_grid_chosen():
    ds = planted(300, 0)
    model, report = tune_threshold(ds, TreeConfig(seed=5), grid=(1.4,))
    assert report.chosen == 1.4
    assert model.config.threshold == 1.4


def test_family_reuse_training_counter():
    ds = planted(300, 1)
    before = tree_learner.TRAIN_CALLS
    _, report = tune_threshold(ds, TreeConfig(seed=5))
    used = tree_learner.TRAIN_CALLS - before
    assert used == 11  # 10 folds + 1 final refit, regardless of grid size
    assert report.n_base_trainings == 11


def test_report_shape_and_csv():
    ds = planted(300, 2)
    model, report = tune_threshold(ds, TreeConfig(seed=5))
    assert len(report.grid) == 15
    assert len(report.per_threshold_cv_metric) == 15
    assert report.chosen in report.grid
    assert report.metric_kind == "rmse"
    csv_text = report.to_csv(["tool x", "seed: 5"])
    lines = csv_text.strip().split("\n")
    assert lines[0] == "# tool x"
    assert lines[2] == "threshold,cv_metric,n_nodes_mean,depth_mean,chosen"
    assert len(lines) == 3 + 15
    assert sum(line.endswith(",1") for line in lines[3:]) == 1


def test_tie_breaks_toward_larger_threshold():
    # constant predictions at every threshold -> all metrics tie -> pick 3.0
    r = np.random.default_rng(3)
    ds = make_dataset({"x": r.uniform(0, 1, 200)}, r.normal(size=200))
    model, report = tune_threshold(ds, TreeConfig(seed=11, min_side=30))
    values = set(report.per_threshold_cv_metric)
    if len(values) == 1:
        assert report.chosen == 3.0


def test_noise_tends_to_single_leaf():
    single_leaf = 0
    for seed in range(5):
        r = np.random.default_rng(seed)
        ds = make_dataset({f"x{i}": r.uniform(0, 1, 150) for i in range(3)},
                          r.normal(size=150))
        model, _ = tune_threshold(ds, TreeConfig(seed=seed))
        if model.n_nodes() == 1:
            single_leaf += 1
    assert single_leaf >= 3  # noise mostly yields the one-node model


def test_planted_recovery_with_chosen_threshold():
    # reduced-scale spot check of the 20-run planted-generator property
    hits = 0
    runs = 5
    for seed in range(runs):
        ds = planted(1000, 100 + seed)
        model, _ = tune_threshold(ds, TreeConfig(seed=seed))
        if model.root.is_leaf:
            continue
        atom = model.root.criterion.atoms[0]
        if atom.feature == "x0" and abs(float(atom.value) - 0.5) <= 0.06:
            hits += 1
    assert hits >= runs - 1


def test_binary_metric_kind():
    r = np.random.default_rng(8)
    x = r.uniform(0, 1, 300)
    y = ((x > 0.5) ^ (r.uniform(size=300) < 0.2)).astype(np.int8)
    ds = make_dataset({"x": x, "w": r.uniform(0, 1, 300)}, y, target_kind=BINARY)
    model, report = tune_threshold(ds, TreeConfig(seed=4))
    assert report.metric_kind == "auroc"
    assert max(report.per_threshold_cv_metric) > 0.7
