"""Evaluation metrics and external-CV threshold tuning.

One 10-fold CV trains a single base tree per fold at the smallest grid
threshold; every other threshold's fold model is derived by pruning, so the
whole grid costs fold-count trainings.  Held-out predictions are pooled
across folds before the metric is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cv_engine import _EXTERNAL_CV_TAG, assign_folds, context_rng, stratify_column
from .data_model import BINARY, CONTINUOUS, Dataset
from .errors import DataError
from .stat_tests import midranks
from .tree_learner import TreeConfig, TreeModel, derive_pruned, learn_tree, predict

DEFAULT_GRID = tuple(k / 5 for k in range(1, 16))  # 0.2, 0.4, ..., 3.0


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties 1/2
    (rank / Mann-Whitney formulation)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC undefined with a single class")
    ranks = midranks(scores)
    r_pos = float(ranks[labels == 1].sum())
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rmse(predictions, actuals) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if predictions.shape != actuals.shape or predictions.size == 0:
        raise DataError("predictions and actuals must have equal nonzero length")
    return float(np.sqrt(np.mean((predictions - actuals) ** 2)))


@dataclass
class TuningReport:
    grid: tuple[float, ...]
    per_threshold_cv_metric: tuple[float, ...]
    chosen: float
    metric_kind: str  # auroc | rmse
    n_nodes_mean: tuple[float, ...] = ()
    depth_mean: tuple[float, ...] = ()
    n_base_trainings: int = 0
    notes: tuple[str, ...] = ()

    def to_csv(self, header_lines=()) -> str:
        lines = [f"# {line}" for line in header_lines]
        lines += [f"# note: {n}" for n in self.notes]
        lines.append("threshold,cv_metric,n_nodes_mean,depth_mean,chosen")
        for i, t in enumerate(self.grid):
            lines.append(
                f"{t!r},{self.per_threshold_cv_metric[i]!r},"
                f"{self.n_nodes_mean[i]!r},{self.depth_mean[i]!r},"
                f"{1 if t == self.chosen else 0}")
        return "\n".join(lines) + "\n"


def _metric_kind(dataset: Dataset) -> str:
    if dataset.target.kind == BINARY:
        return "auroc"
    if dataset.target.kind == CONTINUOUS:
        return "rmse"
    raise DataError("threshold tuning needs a binary or continuous target")


def tune_threshold(dataset: Dataset, config: TreeConfig, grid=None):
    """Pick the operating threshold on the paper's grid via one 10-fold CV.

    Per fold, ONE base tree is trained at min(grid) and the rest of the grid
    is derived by pruning; each threshold's held-out predictions are pooled
    across folds and scored (AUROC maximized / RMSE minimized, ties to the
    LARGER threshold).  Returns the full-data model derived at the chosen
    threshold plus the report.
    """
    grid = tuple(sorted(grid if grid is not None else DEFAULT_GRID))
    if not grid:
        raise DataError("threshold grid is empty")
    metric_kind = _metric_kind(dataset)
    folds = 10
    base_config = TreeConfig(threshold=min(grid), search_depth=config.search_depth,
                             min_side=config.min_side, folds=config.folds,
                             repeats=config.repeats, seed=config.seed, test=config.test)

    rng = context_rng(config.seed, _EXTERNAL_CV_TAG)
    strata = stratify_column(dataset) if dataset.target.kind == BINARY else None
    fold_of = assign_folds(dataset.n, folds, rng, strata)

    notes = []
    preds = {t: np.empty(dataset.n) for t in grid}
    nodes = {t: [] for t in grid}
    depths = {t: [] for t in grid}
    trainings = 0
    for fold in range(folds):
        held_out = fold_of == fold
        base = learn_tree(dataset.subset(~held_out), base_config)
        trainings += 1
        val = dataset.subset(held_out)
        if metric_kind == "auroc" and len(np.unique(val.y)) < 2:
            notes.append(f"fold {fold}: single-class held-out fold")
        for t in grid:
            derived = derive_pruned(base, t)
            preds[t][held_out] = predict(derived, val)
            nodes[t].append(derived.n_nodes())
            depths[t].append(derived.depth())

    per_metric = []
    for t in grid:
        if metric_kind == "auroc":
            per_metric.append(auroc(preds[t], dataset.y))
        else:
            per_metric.append(rmse(preds[t], dataset.y))

    chosen = grid[0]
    best = per_metric[0]
    for t, m in zip(grid[1:], per_metric[1:]):
        if (metric_kind == "auroc" and m >= best) or (metric_kind == "rmse" and m <= best):
            chosen, best = t, m

    final_base = learn_tree(dataset, base_config)
    trainings += 1
    final = derive_pruned(final_base, chosen)
    report = TuningReport(
        grid=grid,
        per_threshold_cv_metric=tuple(per_metric),
        chosen=chosen,
        metric_kind=metric_kind,
        n_nodes_mean=tuple(float(np.mean(nodes[t])) for t in grid),
        depth_mean=tuple(float(np.mean(depths[t])) for t in grid),
        n_base_trainings=trainings,
        notes=tuple(notes),
    )
    return final, report
