"""Tree growth gated by cross-validated z-scores, prediction, pruning, and
model (de)serialization.

Growth recurses while a node's internal-CV score clears the threshold; there
is no post-pruning.  Because each node's score is keyed by (seed, node_path)
only, the tree trained at the smallest threshold embeds every higher-threshold
tree: derive_pruned recovers them without retraining.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .cv_engine import CvConfig, CvScore, internal_cv_score
from .data_model import BINARY, CONTINUOUS, TIME_TO_EVENT, Dataset, FeatureSpec, TargetSpec
from .errors import DataError, ModelFormatError, RefusedLowerThreshold
from .stat_tests import TestKind, select_test
from .subgroup_search import SubgroupCriterion, _Candidates, apply_model, train_best_subgroup

MAX_TREE_DEPTH = 30  # safety bound, not a tuning knob
FORMAT_VERSION = 1

# Incremented once per learn_tree call; lets tests assert that threshold
# tuning reuses one base training per fold instead of retraining per grid
# point.
TRAIN_CALLS = 0


@dataclass(frozen=True)
class TreeConfig:
    threshold: float = 2.0
    search_depth: int = 1
    min_side: int = 10
    folds: int = 5
    repeats: int = 10
    seed: int = 42
    test: TestKind | None = None

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.search_depth not in (1, 2, 3):
            raise ValueError("search_depth must be 1, 2, or 3")
        if self.min_side < 1:
            raise ValueError("min_side must be >= 1")

    @property
    def cv(self) -> CvConfig:
        return CvConfig(self.folds, self.repeats, self.seed)


@dataclass
class TreeNode:
    node_path: str
    leaf_stats: dict
    cv_score: CvScore | None = None
    criterion: SubgroupCriterion | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    stop_reason: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.criterion is None

    def walk(self):
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


@dataclass
class TreeModel:
    root: TreeNode
    config: TreeConfig
    schema: dict
    method: str = "ztree"
    provenance: dict | None = None

    def __post_init__(self):
        if self.provenance is None:
            seed = getattr(self.config, "seed", 0)
            self.provenance = {"tool": "ztree", "version": __version__,
                               "command_line": "", "seed": seed}

    @property
    def target_kind(self) -> str:
        return self.schema["target"]["kind"]

    @property
    def has_treatment(self) -> bool:
        return self.schema["treatment"] is not None

    def n_nodes(self) -> int:
        return sum(1 for _ in self.root.walk())

    def depth(self) -> int:
        return max(len(node.node_path) for node in self.root.walk())


def _leaf_stats(data: Dataset) -> dict:
    stats: dict = {"n": int(data.n)}
    if data.has_treatment:
        trt = data.treatment == 1
        n1, n0 = int(trt.sum()), int((~trt).sum())
        m1 = float(data.y[trt].mean()) if n1 else 0.0
        m0 = float(data.y[~trt].mean()) if n0 else 0.0
        stats.update(n_treated=n1, n_control=n0, mean_treated=m1,
                     mean_control=m0, effect=m1 - m0)
    elif data.target.kind == BINARY:
        stats["positive_fraction"] = float(data.y.mean()) if data.n else 0.0
    elif data.target.kind == CONTINUOUS:
        stats["mean"] = float(data.y.mean()) if data.n else 0.0
    else:
        stats["event_count"] = int(data.events.sum())
        stats["total_time"] = float(data.y.sum())
    return stats


def leaf_value(stats: dict, target_kind: str, has_treatment: bool) -> float:
    """Scalar prediction a leaf emits."""
    if has_treatment:
        return stats["effect"]
    if target_kind == BINARY:
        return stats["positive_fraction"]
    if target_kind == CONTINUOUS:
        return stats["mean"]
    total = stats["total_time"]
    return stats["event_count"] / total if total > 0 else 0.0


def _target_degenerate(data: Dataset) -> bool:
    if data.has_treatment and len(np.unique(data.treatment)) < 2:
        return True
    if data.target.kind == TIME_TO_EVENT:
        return int(data.events.sum()) == 0
    y = data.y
    return bool(np.all(y == y[0]))


def learn_tree(dataset: Dataset, config: TreeConfig) -> TreeModel:
    """Grow a tree by recursive subgroup identification.

    At each node (after the size / degeneracy stop rules) the internal CV
    score is computed; if it passes the threshold, the best subgroup is
    retrained on the full node data and the node splits into (subgroup,
    complement).  Leaves record why growth stopped.
    """
    global TRAIN_CALLS
    TRAIN_CALLS += 1
    if dataset.n == 0:
        raise DataError("cannot learn from an empty dataset")
    test = select_test(dataset.target.kind, dataset.has_treatment, config.test)
    config = dataclasses.replace(config, test=test)
    root = _grow(dataset, "", config)
    return TreeModel(root=root, config=config, schema=dataset.schema_dict())


def _grow(data: Dataset, path: str, config: TreeConfig) -> TreeNode:
    node = TreeNode(node_path=path, leaf_stats=_leaf_stats(data))
    if len(path) >= MAX_TREE_DEPTH:
        node.stop_reason = "depth_cap"
        return node
    if data.n < max(2 * config.min_side, config.folds * config.min_side):
        node.stop_reason = "too_small"
        return node
    if _target_degenerate(data):
        node.stop_reason = "degenerate_target"
        return node
    candidates = _Candidates(data, config.search_depth)
    if not _any_sized_candidate(candidates, data.n, config.min_side):
        node.stop_reason = "no_candidates"
        return node

    node.cv_score = internal_cv_score(data, config.test, config.search_depth,
                                      config.min_side, config.cv, path)
    if node.cv_score.mean_score < config.threshold:
        node.stop_reason = "below_threshold"
        return node

    model = train_best_subgroup(data, config.test, config.search_depth,
                                config.min_side, _candidates=candidates)
    if model is None:
        node.stop_reason = "no_subgroup"
        return node
    member = apply_model(model, data)
    node.criterion = model.criterion
    node.left = _grow(data.subset(member), path + "L", config)
    node.right = _grow(data.subset(~member), path + "R", config)
    return node


def _any_sized_candidate(candidates: _Candidates, n: int, min_side: int) -> bool:
    from . import _kernels
    if candidates.combos.shape[0] == 0:
        return False
    counts = _kernels.combo_aggregates(candidates.masks, candidates.combos,
                                       np.ones((n, 1)))[:, 0]
    floor = max(min_side, 1)
    return bool(np.any((counts >= floor) & (n - counts >= floor)))


# ---------------------------------------------------------------------------
# Prediction

def _feature_frame(data) -> dict[str, np.ndarray]:
    """Raw-valued columns: float64 for continuous, unicode for the rest."""
    if isinstance(data, Dataset):
        frame = {}
        for spec in data.features:
            col = data.columns[spec.name]
            if spec.kind == CONTINUOUS:
                frame[spec.name] = col
            else:
                levels = np.asarray(spec.levels, dtype=object)
                frame[spec.name] = levels[col]
        return frame
    return dict(data)


def _atom_member(atom, spec: FeatureSpec | None, column) -> np.ndarray:
    """Atom predicate on raw columns; missing values and unseen levels are
    non-members, so those rows route to the complement."""
    if column is None or spec is None:
        return np.zeros(0, dtype=bool)
    if spec.kind == CONTINUOUS:
        col = np.asarray(column, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            return col > float(atom.value)
    col = np.asarray(column)
    if atom.op == "==":
        return col == str(atom.value)
    code = {lev: i for i, lev in enumerate(spec.levels)}
    codes = np.array([code.get(v, -1) for v in col], dtype=np.float64)
    codes[codes < 0] = np.nan
    with np.errstate(invalid="ignore"):
        return codes > float(atom.value)


def predict(model: TreeModel, data) -> np.ndarray:
    """Per-row leaf predictions: positive fraction (binary), mean
    (continuous), event rate (time-to-event), or treatment-effect estimate.

    `data` is a Dataset or a mapping of raw columns (float arrays for
    continuous features, strings otherwise).  Rows with missing or unseen
    atom values route to the complement side.
    """
    frame = _feature_frame(data)
    specs = {f["name"]: FeatureSpec(f["name"], f["kind"], tuple(f["levels"]))
             for f in model.schema["features"]}
    n = len(next(iter(frame.values()))) if frame else 0
    for name in frame:
        frame[name] = np.asarray(frame[name])
        n = len(frame[name])

    out = np.empty(n, dtype=np.float64)
    kind = model.target_kind
    has_trt = model.has_treatment
    stack = [(model.root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = leaf_value(node.leaf_stats, kind, has_trt)
            continue
        member = np.ones(rows.size, dtype=bool)
        for atom in node.criterion.atoms:
            spec = specs.get(atom.feature)
            column = frame.get(atom.feature)
            if column is None:
                member[:] = False
                break
            member &= _atom_member(atom, spec, column[rows])
        stack.append((node.left, rows[member]))
        stack.append((node.right, rows[~member]))
    return out


# ---------------------------------------------------------------------------
# Threshold family

def derive_pruned(model: TreeModel, new_threshold: float) -> TreeModel:
    """The tree this model's training would have produced at a higher
    threshold: internal nodes scoring below it become leaves.  No retraining
    happens; exactness is guaranteed by the per-node-path CV seeding."""
    if new_threshold < model.config.threshold:
        raise RefusedLowerThreshold(
            f"model trained at threshold {model.config.threshold}; "
            f"cannot derive at lower {new_threshold}")

    def prune(node: TreeNode) -> TreeNode:
        copy = TreeNode(node.node_path, dict(node.leaf_stats), node.cv_score,
                        stop_reason=node.stop_reason)
        if node.is_leaf:
            return copy
        if node.cv_score.mean_score < new_threshold:
            copy.stop_reason = "below_threshold"
            return copy
        copy.criterion = node.criterion
        copy.left = prune(node.left)
        copy.right = prune(node.right)
        return copy

    config = dataclasses.replace(model.config, threshold=new_threshold)
    return TreeModel(root=prune(model.root), config=config, schema=model.schema,
                     method=model.method, provenance=dict(model.provenance))


# ---------------------------------------------------------------------------
# Serialization

def _node_doc(node: TreeNode) -> dict:
    doc = {
        "path": node.node_path,
        "cv_score": None if node.cv_score is None else {
            "mean": node.cv_score.mean_score,
            "per_repeat": list(node.cv_score.per_repeat),
        },
        "criterion": None if node.criterion is None else node.criterion.text(),
        "leaf_stats": node.leaf_stats,
        "stop_reason": node.stop_reason,
        "children": None if node.is_leaf else [_node_doc(node.left), _node_doc(node.right)],
    }
    return doc


def _node_from_doc(doc: dict, path: str) -> TreeNode:
    cv = doc.get("cv_score")
    node = TreeNode(
        node_path=doc.get("path", path),
        leaf_stats=doc["leaf_stats"],
        cv_score=None if cv is None else CvScore(cv["mean"], tuple(cv["per_repeat"])),
        stop_reason=doc.get("stop_reason"),
    )
    crit = doc.get("criterion")
    children = doc.get("children")
    if (crit is None) != (children is None):
        raise ModelFormatError("internal node must carry both criterion and children")
    if crit is not None:
        node.criterion = SubgroupCriterion.from_text(crit)
        if len(children) != 2:
            raise ModelFormatError("internal node must have exactly two children")
        node.left = _node_from_doc(children[0], path + "L")
        node.right = _node_from_doc(children[1], path + "R")
    return node


def _config_doc(model: TreeModel) -> dict:
    c = model.config
    if model.method == "cart":
        return {"max_depth": c.max_depth, "min_samples_split": c.min_samples_split}
    return {
        "threshold": c.threshold,
        "search_depth": c.search_depth,
        "min_side": c.min_side,
        "folds": c.folds,
        "repeats": c.repeats,
        "seed": c.seed,
        "test": c.test.value if c.test is not None else None,
    }


def schema_fingerprint(schema: dict) -> str:
    import hashlib
    blob = json.dumps(schema, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def serialize(model: TreeModel) -> str:
    """Canonical JSON document; re-serializing a deserialized model is
    byte-identical."""
    doc = {
        "header": model.provenance,
        "format_version": FORMAT_VERSION,
        "method": model.method,
        "config": _config_doc(model),
        "schema": model.schema,
        "schema_fingerprint": schema_fingerprint(model.schema),
        "root": _node_doc(model.root),
    }
    return json.dumps(doc, indent=2) + "\n"


def deserialize(text: str) -> TreeModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model document: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFormatError("missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {doc['format_version']!r}")
    if "schema_fingerprint" not in doc:
        raise ModelFormatError("schema fingerprint absent")
    schema = doc["schema"]
    if doc["schema_fingerprint"] != schema_fingerprint(schema):
        raise ModelFormatError("schema fingerprint does not match schema")

    method = doc.get("method", "ztree")
    cfg_doc = doc["config"]
    if method == "cart":
        from .baseline_cart import CartParams
        config = CartParams(cfg_doc["max_depth"], cfg_doc["min_samples_split"])
    else:
        config = TreeConfig(
            threshold=cfg_doc["threshold"],
            search_depth=cfg_doc["search_depth"],
            min_side=cfg_doc["min_side"],
            folds=cfg_doc["folds"],
            repeats=cfg_doc["repeats"],
            seed=cfg_doc["seed"],
            test=None if cfg_doc["test"] is None else TestKind(cfg_doc["test"]),
        )
    root = _node_from_doc(doc["root"], "")
    model = TreeModel(root=root, config=config, schema=schema, method=method,
                      provenance=doc.get("header") or {})
    if method == "ztree":
        for node in root.walk():
            if not node.is_leaf:
                if node.cv_score is None:
                    raise ModelFormatError(f"internal node {node.node_path!r} lacks a cv score")
                if node.cv_score.mean_score < config.threshold:
                    raise ModelFormatError(
                        f"internal node {node.node_path!r} scores "
                        f"{node.cv_score.mean_score} below threshold {config.threshold}")
    return model


def models_equal(a: TreeModel, b: TreeModel) -> bool:
    """Structural equality ignoring provenance (header) differences."""
    if a.method != b.method or a.config != b.config or a.schema != b.schema:
        return False

    def eq(x: TreeNode, y: TreeNode) -> bool:
        if (x.node_path != y.node_path or x.stop_reason != y.stop_reason
                or x.leaf_stats != y.leaf_stats or x.cv_score != y.cv_score):
            return False
        if x.is_leaf != y.is_leaf:
            return False
        if x.is_leaf:
            return True
        return x.criterion == y.criterion and eq(x.left, y.left) and eq(x.right, y.right)

    return eq(a.root, b.root)
