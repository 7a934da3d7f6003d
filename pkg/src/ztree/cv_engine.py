"""Internal cross-validation producing the adjusted split score for one node.

The RNG stream a node uses is keyed by (seed, node_path, repeat), never by the
threshold used to reach the node.  That keying is what makes a node's score a
pure function of its data and path, so a whole family of trees at higher
thresholds can be derived from one base tree without retraining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import BINARY, TIME_TO_EVENT, Dataset
from .errors import DegenerateSample, TooSmall
from .stat_tests import (TestKind, TreatmentGroupSample, ZScore,
                         differential_effect_z, logrank_z, mann_whitney_z,
                         two_proportion_z, welch_t_z)
from .subgroup_search import apply_model, train_best_subgroup

_NODE_CV_TAG = 1
_EXTERNAL_CV_TAG = 2
_BENCH_TAG = 3


@dataclass(frozen=True)
class CvConfig:
    folds: int = 5
    repeats: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class CvScore:
    mean_score: float
    per_repeat: tuple[float, ...]


def path_key(node_path: str) -> int:
    """Injective encoding of an L/R path string as a nonnegative integer."""
    key = 1
    for step in node_path:
        key = key * 2 + (1 if step == "R" else 0)
    return key


def node_rng(seed: int, node_path: str, repeat: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, _NODE_CV_TAG, path_key(node_path), repeat]))


def context_rng(seed: int, tag: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag, *extra]))


def stratify_column(dataset: Dataset):
    """Stratification labels: treatment arm when present, target class for
    binary targets, None otherwise (plain random folds)."""
    if dataset.has_treatment:
        return dataset.treatment
    if dataset.target.kind == BINARY:
        return dataset.y
    return None


def assign_folds(n: int, folds: int, rng: np.random.Generator, strata=None) -> np.ndarray:
    """Fold id per instance; every instance in exactly one fold, sizes differ
    by at most one.  With strata, instances are shuffled within each stratum
    and dealt round-robin so the folds stay balanced per stratum."""
    if strata is None:
        perm = rng.permutation(n)
    else:
        strata = np.asarray(strata)
        parts = []
        for value in np.unique(strata):
            idx = np.flatnonzero(strata == value)
            parts.append(idx[rng.permutation(idx.size)])
        perm = np.concatenate(parts)
    fold_of = np.empty(n, dtype=np.int32)
    fold_of[perm] = np.arange(n, dtype=np.int32) % folds
    return fold_of


def pooled_test_z(dataset: Dataset, member: np.ndarray, test: TestKind) -> ZScore:
    """One pooled two-sample test of members vs non-members of a node."""
    m = member
    y = dataset.y
    if test == TestKind.TWO_PROPORTION_Z:
        return two_proportion_z(int(y[m].sum()), int(m.sum()),
                                int(y[~m].sum()), int((~m).sum()))
    if test == TestKind.WELCH_T:
        return welch_t_z(y[m], y[~m])
    if test == TestKind.MANN_WHITNEY_U:
        return mann_whitney_z(y[m], y[~m])
    if test == TestKind.LOG_RANK:
        return logrank_z(y[m], dataset.events[m], y[~m], dataset.events[~m])
    if test in (TestKind.DIFF_EFFECT_BINARY, TestKind.DIFF_EFFECT_CONTINUOUS):
        trt = dataset.treatment == 1
        kind = "binary" if test == TestKind.DIFF_EFFECT_BINARY else "continuous"
        sub = TreatmentGroupSample(y[m & trt], y[m & ~trt])
        comp = TreatmentGroupSample(y[~m & trt], y[~m & ~trt])
        return differential_effect_z(sub, comp, kind)
    raise ValueError(f"unknown test kind {test!r}")


def internal_cv_score(dataset: Dataset, test: TestKind, search_depth: int,
                      min_side: int, cfg: CvConfig, node_path: str) -> CvScore:
    """Mean over repeats of the pooled |z| of cross-validation-assigned
    subgroup memberships.

    Per repeat: shuffle with the (seed, node_path, repeat) stream, split into
    near-equal folds (stratified by class / treatment arm where applicable),
    train the best subgroup on each fold's complement and mark the held-out
    fold's membership; the repeat's score is |z| of ONE pooled test of members
    vs non-members, or 0 when any fold finds no subgroup or the pooled
    partition is degenerate or one-sided.
    """
    n = dataset.n
    if n < cfg.folds * max(min_side, 1):
        raise TooSmall(f"n={n} cannot support {cfg.folds} folds at min_side={min_side}")
    strata = stratify_column(dataset)
    floor = max(int(min_side), 1)
    per_repeat = []
    for repeat in range(cfg.repeats):
        rng = node_rng(cfg.seed, node_path, repeat)
        fold_of = assign_folds(n, cfg.folds, rng, strata)
        member = np.zeros(n, dtype=bool)
        complete = True
        for fold in range(cfg.folds):
            held_out = fold_of == fold
            model = train_best_subgroup(dataset.subset(~held_out), test,
                                        search_depth, min_side)
            if model is None:
                complete = False
                break
            member[held_out] = apply_model(model, dataset.subset(held_out))
        if not complete:
            per_repeat.append(0.0)
            continue
        n_in = int(member.sum())
        if n_in < floor or n - n_in < floor:
            per_repeat.append(0.0)
            continue
        try:
            z = pooled_test_z(dataset, member, test)
        except (DegenerateSample, ValueError):
            per_repeat.append(0.0)
            continue
        per_repeat.append(z.magnitude)
    return CvScore(float(np.mean(per_repeat)), tuple(per_repeat))
