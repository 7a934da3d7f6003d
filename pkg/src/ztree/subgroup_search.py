"""Candidate subgroup enumeration and best-subgroup search.

A criterion is a conjunction of one to three atoms over distinct features:
`feature > cutoff` on continuous/ordinal columns (cutoffs from the percentile
candidate rule) and `feature == level` on nominal columns.  Search scores
every candidate with the node's statistical test and keeps the criterion with
the largest |z|, ties broken by enumeration order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data_model import CONTINUOUS, NOMINAL, Dataset, compute_cutoffs
from .stat_tests import TestKind, ZScore, midranks, tie_term


@dataclass(frozen=True)
class Atom:
    """One atomic condition: (feature > cutoff) or (feature == level)."""

    feature: str
    op: str  # ">" or "=="
    value: float | str

    def text(self) -> str:
        if self.op == ">":
            return f"{self.feature}>{float(self.value)!r}"
        return f"{self.feature}=={self.value}"


@dataclass(frozen=True)
class SubgroupCriterion:
    """Conjunction of 1-3 atoms over distinct features."""

    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not 1 <= len(self.atoms) <= 3:
            raise ValueError("criterion must hold 1 to 3 atoms")
        names = [a.feature for a in self.atoms]
        if len(set(names)) != len(names):
            raise ValueError("criterion atoms must reference distinct features")

    def text(self) -> str:
        return " & ".join(a.text() for a in self.atoms)

    @classmethod
    def from_text(cls, text: str) -> "SubgroupCriterion":
        atoms = []
        for part in text.split(" & "):
            if "==" in part:
                feat, level = part.split("==", 1)
                atoms.append(Atom(feat, "==", level))
            elif ">" in part:
                feat, cut = part.split(">", 1)
                atoms.append(Atom(feat, ">", float(cut)))
            else:
                raise ValueError(f"cannot parse atom {part!r}")
        return cls(tuple(atoms))


@dataclass(frozen=True)
class SubgroupModel:
    """Winning criterion plus its training-set score."""

    criterion: SubgroupCriterion
    train_score: ZScore


def atom_mask(atom: Atom, dataset: Dataset) -> np.ndarray:
    """Boolean membership of one atom; unknown features or unseen levels
    evaluate to all-False (instances route to the complement)."""
    if atom.feature not in dataset.columns:
        return np.zeros(dataset.n, dtype=bool)
    col = dataset.columns[atom.feature]
    if atom.op == ">":
        return col > float(atom.value)
    spec = dataset.feature(atom.feature)
    try:
        code = spec.levels.index(str(atom.value))
    except ValueError:
        return np.zeros(dataset.n, dtype=bool)
    return col == code


def apply_model(model, dataset: Dataset) -> np.ndarray:
    """Membership column for a SubgroupModel or bare criterion (conjunction)."""
    criterion = getattr(model, "criterion", model)
    member = np.ones(dataset.n, dtype=bool)
    for atom in criterion.atoms:
        member &= atom_mask(atom, dataset)
    return member


class _Candidates:
    """Atoms, their membership masks, and the ordered conjunction index table."""

    def __init__(self, dataset: Dataset, search_depth: int):
        if search_depth not in (1, 2, 3):
            raise ValueError("search_depth must be 1, 2, or 3")
        self.dataset = dataset
        atoms: list[Atom] = []
        per_feature: list[list[int]] = []
        for spec in dataset.features:
            col = dataset.columns[spec.name]
            idxs: list[int] = []
            if spec.kind == NOMINAL:
                for level in spec.levels:
                    idxs.append(len(atoms))
                    atoms.append(Atom(spec.name, "==", level))
            else:
                for cut in compute_cutoffs(col) if col.size else []:
                    idxs.append(len(atoms))
                    atoms.append(Atom(spec.name, ">", float(cut)))
            per_feature.append(idxs)
        self.atoms = atoms

        n = dataset.n
        masks = np.zeros((max(len(atoms), 1), n), dtype=bool)
        for i, atom in enumerate(atoms):
            masks[i] = atom_mask(atom, dataset)
        self.masks = np.ascontiguousarray(masks)

        combos: list[tuple[int, ...]] = []
        feat_ids = [i for i, idxs in enumerate(per_feature) if idxs]
        for d in range(1, search_depth + 1):
            for feats in itertools.combinations(feat_ids, d):
                combos.extend(itertools.product(*(per_feature[f] for f in feats)))
        if combos:
            table = np.full((len(combos), search_depth), -1, dtype=np.int32)
            for j, combo in enumerate(combos):
                table[j, :len(combo)] = combo
        else:
            table = np.zeros((0, search_depth), dtype=np.int32)
        self.combos = np.ascontiguousarray(table)

    def criterion(self, j: int) -> SubgroupCriterion:
        ids = [int(a) for a in self.combos[j] if a >= 0]
        return SubgroupCriterion(tuple(self.atoms[a] for a in ids))


def _score_candidates(cand: _Candidates, test: TestKind, min_side: int):
    """z value per candidate; NaN marks unscoreable ones.  Returns None when
    the whole node is degenerate for this test."""
    ds = cand.dataset
    n = ds.n
    if cand.combos.shape[0] == 0:
        return None
    floor = max(int(min_side), 1)

    if test == TestKind.LOG_RANK:
        counts = _kernels.combo_aggregates(cand.masks, cand.combos, np.ones((n, 1)))[:, 0]
        if int(ds.events.sum()) < 1:
            return None
        order = np.argsort(ds.y, kind="stable").astype(np.int64)
        oev = _kernels.logrank_oev(cand.masks, cand.combos, order,
                                   ds.y.astype(np.float64), ds.events)
        valid = (counts >= floor) & (n - counts >= floor) & (oev[:, 1] > 0.0)
        z = np.full(counts.shape, np.nan)
        np.divide(oev[:, 0], np.sqrt(oev[:, 1]), out=z, where=valid)
        return z

    y = ds.y.astype(np.float64)
    if test == TestKind.TWO_PROPORTION_Z:
        total_pos = float(y.sum())
        p_pool = total_pos / n
        if p_pool <= 0.0 or p_pool >= 1.0:
            return None
        agg = _kernels.combo_aggregates(cand.masks, cand.combos,
                                        np.column_stack([np.ones(n), y]))
        n1, pos1 = agg[:, 0], agg[:, 1]
        n2 = n - n1
        valid = (n1 >= floor) & (n2 >= floor)
        se = np.sqrt(p_pool * (1.0 - p_pool) * (1.0 / np.maximum(n1, 1) + 1.0 / np.maximum(n2, 1)))
        z = np.full(n1.shape, np.nan)
        np.divide(pos1 / np.maximum(n1, 1) - (total_pos - pos1) / np.maximum(n2, 1),
                  se, out=z, where=valid)
        return z

    if test == TestKind.WELCH_T:
        agg = _kernels.combo_aggregates(cand.masks, cand.combos,
                                        np.column_stack([np.ones(n), y, y * y]))
        n1, s1, ss1 = agg[:, 0], agg[:, 1], agg[:, 2]
        n2 = n - n1
        s2 = float(y.sum()) - s1
        ss2 = float((y * y).sum()) - ss1
        valid = (n1 >= max(floor, 2)) & (n2 >= max(floor, 2))
        v1 = np.maximum(ss1 - s1 * s1 / np.maximum(n1, 1), 0.0) / np.maximum(n1 - 1, 1)
        v2 = np.maximum(ss2 - s2 * s2 / np.maximum(n2, 1), 0.0) / np.maximum(n2 - 1, 1)
        se2 = v1 / np.maximum(n1, 1) + v2 / np.maximum(n2, 1)
        valid &= se2 > 0.0
        z = np.full(n1.shape, np.nan)
        np.divide(s1 / np.maximum(n1, 1) - s2 / np.maximum(n2, 1),
                  np.sqrt(np.where(se2 > 0, se2, 1.0)), out=z, where=valid)
        return z

    if test == TestKind.MANN_WHITNEY_U:
        if n < 4:
            return None
        sigma2_unit = ((n + 1) - tie_term(y) / (n * (n - 1.0))) / 12.0
        if sigma2_unit <= 0.0:
            return None
        ranks = midranks(y)
        agg = _kernels.combo_aggregates(cand.masks, cand.combos,
                                        np.column_stack([np.ones(n), ranks]))
        n1, r1 = agg[:, 0], agg[:, 1]
        n2 = n - n1
        valid = (n1 >= floor) & (n2 >= floor)
        u1 = r1 - n1 * (n1 + 1) / 2.0
        sigma = np.sqrt(np.maximum(n1 * n2 * sigma2_unit, 0.0))
        z = np.full(n1.shape, np.nan)
        np.divide(u1 - n1 * n2 / 2.0, np.where(sigma > 0, sigma, 1.0),
                  out=z, where=valid & (sigma > 0))
        return z

    if test in (TestKind.DIFF_EFFECT_BINARY, TestKind.DIFF_EFFECT_CONTINUOUS):
        trt = ds.treatment.astype(np.float64)
        ctl = 1.0 - trt
        cols = np.column_stack([np.ones(n), trt, y * ctl, y * trt,
                                y * y * ctl, y * y * trt])
        agg = _kernels.combo_aggregates(cand.masks, cand.combos, cols)
        tot = cols.sum(axis=0)
        n_in, n1_in, s0_in, s1_in, ss0_in, ss1_in = (agg[:, c] for c in range(6))
        n_out = n - n_in
        n1_out = tot[1] - n1_in
        n0_in = n_in - n1_in
        n0_out = n_out - n1_out
        s0_out, s1_out = tot[2] - s0_in, tot[3] - s1_in
        ss0_out, ss1_out = tot[4] - ss0_in, tot[5] - ss1_in

        binary = test == TestKind.DIFF_EFFECT_BINARY
        arm_floor = 1 if binary else 2
        valid = ((n_in >= floor) & (n_out >= floor)
                 & (n1_in >= arm_floor) & (n0_in >= arm_floor)
                 & (n1_out >= arm_floor) & (n0_out >= arm_floor))

        def arm(s, ss, m):
            m_safe = np.maximum(m, 1)
            mean = s / m_safe
            if binary:
                var = mean * (1.0 - mean) / m_safe
            else:
                var = np.maximum(ss - s * s / m_safe, 0.0) / np.maximum(m - 1, 1) / m_safe
            return mean, var

        m1i, v1i = arm(s1_in, ss1_in, n1_in)
        m0i, v0i = arm(s0_in, ss0_in, n0_in)
        m1o, v1o = arm(s1_out, ss1_out, n1_out)
        m0o, v0o = arm(s0_out, ss0_out, n0_out)
        se2 = (v1i + v0i) + (v1o + v0o)
        valid &= se2 > 0.0
        z = np.full(n_in.shape, np.nan)
        np.divide((m1i - m0i) - (m1o - m0o), np.sqrt(np.where(se2 > 0, se2, 1.0)),
                  out=z, where=valid)
        return z

    raise ValueError(f"unknown test kind {test!r}")


def enumerate_criteria(dataset: Dataset, search_depth: int, min_side: int):
    """All candidate criteria in deterministic order: atom count, then feature
    declaration order, then cutoff ascending / level declaration order.
    Candidates whose subgroup or complement is smaller than min_side are
    dropped; the list may be empty."""
    cand = _Candidates(dataset, search_depth)
    if cand.combos.shape[0] == 0:
        return []
    counts = _kernels.combo_aggregates(cand.masks, cand.combos,
                                       np.ones((dataset.n, 1)))[:, 0]
    floor = max(int(min_side), 1)
    keep = (counts >= floor) & (dataset.n - counts >= floor)
    return [cand.criterion(j) for j in np.flatnonzero(keep)]


def train_best_subgroup(dataset: Dataset, test: TestKind, search_depth: int,
                        min_side: int, _candidates: _Candidates | None = None):
    """Best-scoring candidate subgroup, or None when nothing is scoreable.

    Scores every enumerated criterion with `test` against its complement and
    returns the one maximizing |z|; exact ties go to the earlier candidate.
    """
    cand = _candidates if _candidates is not None else _Candidates(dataset, search_depth)
    z = _score_candidates(cand, test, min_side)
    if z is None:
        return None
    absz = np.where(np.isfinite(z), np.abs(z), -1.0)
    best = int(np.argmax(absz))
    if absz[best] < 0.0:
        return None
    return SubgroupModel(cand.criterion(best), ZScore(float(z[best])))
