"""Minimal impurity-based CART baseline for the benchmark harness.

Greedy binary trees minimizing weighted child Gini (classification) or
variance (regression), with an exhaustive midpoint threshold scan on numeric
columns and internal one-hot expansion of nominal features.  Shares the
TreeModel structure and serialization, so prediction and reporting reuse the
main code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cv_engine import assign_folds, context_rng, stratify_column
from .data_model import BINARY, CONTINUOUS, NOMINAL, Dataset
from .errors import DataError
from .subgroup_search import Atom, SubgroupCriterion
from .tree_learner import TreeModel, TreeNode, _leaf_stats

_CART_CV_TAG = 4


@dataclass(frozen=True)
class CartParams:
    max_depth: int
    min_samples_split: int

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


DEFAULT_DEPTH_GRID = tuple(range(1, 13))
DEFAULT_MSS_GRID = (2, 5, 10, 20, 50)


def _split_columns(dataset: Dataset):
    """Scan columns in declaration order: numeric columns as-is, nominal
    features as one per-level indicator (split == membership in that level)."""
    cols = []
    for spec in dataset.features:
        data = dataset.columns[spec.name]
        if spec.kind == NOMINAL:
            for code, level in enumerate(spec.levels):
                cols.append((Atom(spec.name, "==", level),
                             (data == code).astype(np.float64)))
        else:
            cols.append((spec.name, data.astype(np.float64)))
    return cols


def _best_threshold(x: np.ndarray, y: np.ndarray, classification: bool):
    """Lowest weighted child impurity over midpoints of consecutive distinct
    values; returns (impurity, threshold) or None when the column is constant."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = x.size
    cut_after = np.flatnonzero(xs[:-1] != xs[1:])
    if cut_after.size == 0:
        return None
    n_left = (cut_after + 1).astype(np.float64)
    n_right = n - n_left
    if classification:
        pos_left = np.cumsum(ys)[cut_after]
        pos_right = float(ys.sum()) - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        g_l = 2.0 * p_l * (1.0 - p_l)
        g_r = 2.0 * p_r * (1.0 - p_r)
        impurity = (n_left * g_l + n_right * g_r) / n
    else:
        s_left = np.cumsum(ys)[cut_after]
        ss_left = np.cumsum(ys * ys)[cut_after]
        s_right = float(ys.sum()) - s_left
        ss_right = float((ys * ys).sum()) - ss_left
        var_l = np.maximum(ss_left - s_left * s_left / n_left, 0.0) / n_left
        var_r = np.maximum(ss_right - s_right * s_right / n_right, 0.0) / n_right
        impurity = (n_left * var_l + n_right * var_r) / n
    best = int(np.argmin(impurity))
    threshold = (xs[cut_after[best]] + xs[cut_after[best] + 1]) / 2.0
    return float(impurity[best]), float(threshold)


def _node_impurity(y: np.ndarray, classification: bool) -> float:
    if classification:
        p = float(y.mean())
        return 2.0 * p * (1.0 - p)
    return float(np.var(y))


def learn_cart(dataset: Dataset, params: CartParams) -> TreeModel:
    """Greedy impurity-minimizing tree honoring max_depth / min_samples_split.

    Ties between splits go to the first candidate in scan order (feature
    declaration order, threshold ascending); a node splits only when some
    split strictly reduces impurity.
    """
    if dataset.n == 0:
        raise DataError("cannot learn from an empty dataset")
    if dataset.target.kind not in (BINARY, CONTINUOUS) or dataset.has_treatment:
        raise DataError("CART baseline supports plain binary/continuous targets only")
    classification = dataset.target.kind == BINARY

    def grow(data: Dataset, path: str) -> TreeNode:
        node = TreeNode(node_path=path, leaf_stats=_leaf_stats(data))
        if len(path) >= params.max_depth:
            node.stop_reason = "max_depth"
            return node
        if data.n < params.min_samples_split:
            node.stop_reason = "too_small"
            return node
        y = data.y.astype(np.float64)
        parent = _node_impurity(y, classification)
        if parent <= 0.0:
            node.stop_reason = "pure"
            return node
        best = None
        for key, col in _split_columns(data):
            found = _best_threshold(col, y, classification)
            if found is None:
                continue
            impurity, threshold = found
            if best is None or impurity < best[0]:
                best = (impurity, key, threshold, col)
        if best is None or best[0] >= parent:
            node.stop_reason = "no_split"
            return node
        _, key, threshold, col = best
        if isinstance(key, Atom):
            atom = key  # indicator > 0.5 is exactly level equality
        else:
            atom = Atom(key, ">", threshold)
        member = col > threshold
        node.criterion = SubgroupCriterion((atom,))
        node.left = grow(data.subset(member), path + "L")
        node.right = grow(data.subset(~member), path + "R")
        return node

    root = grow(dataset, "")
    return TreeModel(root=root, config=params, schema=dataset.schema_dict(),
                     method="cart")


def tune_cart(dataset: Dataset, depth_grid=DEFAULT_DEPTH_GRID,
              mss_grid=DEFAULT_MSS_GRID, seed: int = 42, folds: int = 10) -> CartParams:
    """Grid search over (max_depth, min_samples_split) with one 10-fold CV,
    pooled AUROC/RMSE; ties prefer smaller depth, then larger
    min_samples_split."""
    from .model_selection import auroc, rmse  # local import avoids a cycle
    if not depth_grid or not mss_grid:
        raise DataError("parameter grids must be nonempty")
    classification = dataset.target.kind == BINARY
    rng = context_rng(seed, _CART_CV_TAG)
    strata = stratify_column(dataset) if classification else None
    fold_of = assign_folds(dataset.n, folds, rng, strata)

    from .tree_learner import predict
    best_params = None
    best_metric = None
    for depth in sorted(depth_grid):
        for mss in sorted(mss_grid, reverse=True):
            params = CartParams(depth, mss)
            preds = np.empty(dataset.n)
            for fold in range(folds):
                held_out = fold_of == fold
                model = learn_cart(dataset.subset(~held_out), params)
                preds[held_out] = predict(model, dataset.subset(held_out))
            metric = auroc(preds, dataset.y) if classification else rmse(preds, dataset.y)
            better = (best_metric is None
                      or (classification and metric > best_metric)
                      or (not classification and metric < best_metric))
            if better:
                best_params, best_metric = params, metric
    return best_params
