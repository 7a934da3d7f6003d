"""Command-line front end: train, tune, prune, predict, eval, synth, bench.

Every artifact starts with a header naming the tool version, the command line,
and the seed; identical commands produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import _kernels
from ._version import __version__
from .data_model import (BINARY, CONTINUOUS, TIME_TO_EVENT, Dataset, ingest_csv,
                         read_csv_columns, read_schema_file, write_csv, write_schema)
from .errors import DataError, ZTreeError
from .model_selection import DEFAULT_GRID, auroc, rmse, tune_threshold
from .stat_tests import TestKind
from .subgroup_search import SubgroupCriterion
from .synth_bench import BenchmarkSpec, GeneratorSpec, generate, run_benchmark
from .tree_learner import (TreeConfig, TreeModel, derive_pruned, deserialize,
                           predict, serialize)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="input CSV (header row required)")
    p.add_argument("--schema", help="schema override file (column = role lines)")
    p.add_argument("--target", help="target column name")
    p.add_argument("--target-kind", choices=[BINARY, CONTINUOUS, TIME_TO_EVENT])
    p.add_argument("--treatment", help="binary treatment column name")
    p.add_argument("--na-policy", default="error",
                   choices=["error", "drop-rows", "na-level"])
    p.add_argument("--na-values", default="",
                   help="comma-separated cell strings treated as missing "
                        "(empty cells always are)")
    p.add_argument("--positive-label", help="raw label mapped to 1 for binary targets")


def _add_train_flags(p, with_threshold=True):
    if with_threshold:
        p.add_argument("--threshold", type=float, default=2.0,
                       help="z threshold gating splits (default 2.0)")
    p.add_argument("--search-depth", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--min-side", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--test", choices=[t.value for t in TestKind],
                   help="statistical test (default chosen by target kind)")


def _add_common(p):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=None,
                   help="max kernel threads (env ZTREE_THREADS as fallback); "
                        "results are identical for any value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ztree",
        description="Decision trees gated by cross-validated z-scores.")
    parser.add_argument("--version", action="version", version=f"ztree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tree at a fixed threshold")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("tune", help="pick the threshold by external 10-fold CV")
    _add_data_flags(p)
    _add_train_flags(p, with_threshold=False)
    _add_common(p)
    p.add_argument("--grid", help="comma-separated thresholds (default 0.2..3.0 step 0.2)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="tuning report CSV to write")

    p = sub.add_parser("prune", help="derive the tree at a higher threshold")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("predict", help="per-row predictions for a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="AUROC/RMSE of a model or a predictions file")
    p.add_argument("--model", help="model file (predicts in-process)")
    p.add_argument("--pred", help="predictions CSV from the predict command")
    _add_data_flags(p)
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--features", type=int, default=5, help="number of continuous features")
    p.add_argument("--mode", default="null",
                   choices=["null", "outcome-shift", "treatment-interaction"])
    p.add_argument("--outcome", default=CONTINUOUS, choices=[BINARY, CONTINUOUS])
    p.add_argument("--planted", help="criterion text, e.g. 'x1>0.5'")
    p.add_argument("--effect", type=float, default=1.0)
    p.add_argument("--base-rate", type=float, default=0.5)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", help="also write the matching schema file")
    _add_common(p)

    p = sub.add_parser("bench", help="resampled ztree-vs-cart comparison")
    _add_data_flags(p)
    p.add_argument("--sizes", default="100,300,1000,3000")
    p.add_argument("--resamples", type=int, default=10)
    p.add_argument("--methods", default="ztree,cart")
    p.add_argument("--grid", help="ztree threshold grid")
    p.add_argument("--search-depth", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--min-side", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--timing", action="store_true",
                   help="record wall times (makes reports non-reproducible)")
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _header_lines(args) -> list[str]:
    cmd = "ztree " + " ".join(args.argv)
    return [f"ztree {__version__}", f"command: {cmd}", f"seed: {args.seed}"]


def _load_dataset(args) -> Dataset:
    schema = read_schema_file(args.schema) if args.schema else None
    na_values = {""} | {v for v in (args.na_values or "").split(",") if v}
    return ingest_csv(
        args.data, target=args.target, schema=schema, na_policy=args.na_policy,
        treatment=args.treatment, target_kind=args.target_kind,
        positive_label=args.positive_label, na_values=frozenset(na_values))


def _tree_config(args, threshold=None) -> TreeConfig:
    return TreeConfig(
        threshold=args.threshold if threshold is None else threshold,
        search_depth=args.search_depth, min_side=args.min_side,
        folds=args.folds, repeats=args.repeats, seed=args.seed,
        test=TestKind(args.test) if getattr(args, "test", None) else None)


def _save_model(model: TreeModel, args, path) -> None:
    model.provenance = {"tool": "ztree", "version": __version__,
                        "command_line": "ztree " + " ".join(args.argv),
                        "seed": args.seed}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(model))


def _load_model(path) -> TreeModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return deserialize(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc


def _parse_grid(text):
    if not text:
        return DEFAULT_GRID
    try:
        grid = tuple(float(v) for v in text.split(",") if v)
    except ValueError as exc:
        raise DataError(f"bad --grid value: {exc}") from exc
    if not grid:
        raise DataError("--grid is empty")
    return grid


def _cmd_train(args) -> int:
    from .tree_learner import learn_tree
    dataset = _load_dataset(args)
    model = learn_tree(dataset, _tree_config(args))
    _save_model(model, args, args.out)
    print(f"wrote {args.out}: {model.n_nodes()} nodes, depth {model.depth()}")
    return 0


def _cmd_tune(args) -> int:
    dataset = _load_dataset(args)
    grid = _parse_grid(args.grid)
    model, report = tune_threshold(dataset, _tree_config(args, threshold=min(grid)), grid)
    _save_model(model, args, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv(_header_lines(args)))
    print(f"chosen threshold {report.chosen!r} "
          f"({report.metric_kind}={max(report.per_threshold_cv_metric) if report.metric_kind == 'auroc' else min(report.per_threshold_cv_metric)!r}); wrote {args.out}")
    return 0


def _cmd_prune(args) -> int:
    model = _load_model(args.model)
    pruned = derive_pruned(model, args.threshold)
    _save_model(pruned, args, args.out)
    print(f"wrote {args.out}: {pruned.n_nodes()} nodes, depth {pruned.depth()}")
    return 0


def _frame_for_model(model: TreeModel, path):
    raw = read_csv_columns(path)
    frame = {}
    for f in model.schema["features"]:
        if f["name"] not in raw:
            continue
        cells = raw[f["name"]]
        if f["kind"] == CONTINUOUS:
            vals = np.empty(len(cells))
            for i, c in enumerate(cells):
                try:
                    vals[i] = float(c)
                except ValueError:
                    vals[i] = np.nan
            frame[f["name"]] = vals
        else:
            frame[f["name"]] = np.asarray(cells, dtype=object)
    if not frame:
        raise DataError(f"{path} shares no feature columns with the model")
    return frame


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    frame = _frame_for_model(model, args.data)
    preds = predict(model, frame)
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in _header_lines(args):
            fh.write(f"# {line}\n")
        fh.write("row,prediction\n")
        for i, value in enumerate(preds):
            fh.write(f"{i},{float(value)!r}\n")
    print(f"wrote {args.out}: {len(preds)} predictions")
    return 0


def _cmd_eval(args) -> int:
    if (args.model is None) == (args.pred is None):
        raise DataError("eval needs exactly one of --model / --pred")
    if args.model:
        model = _load_model(args.model)
        target = model.schema["target"]
        args.target = args.target or target["name"]
        args.target_kind = args.target_kind or target["kind"]
        dataset = _load_dataset(args)
        preds = predict(model, dataset)
        kind = target["kind"]
    else:
        dataset = _load_dataset(args)
        cols = read_csv_columns(args.pred)
        if "prediction" not in cols:
            raise DataError(f"{args.pred} has no 'prediction' column")
        preds = np.array([float(v) for v in cols["prediction"]])
        if preds.size != dataset.n:
            raise DataError(f"{preds.size} predictions vs {dataset.n} data rows")
        kind = dataset.target.kind
    if kind == BINARY:
        value = auroc(preds, dataset.y)
        print(f"auroc={value!r}")
    elif kind == CONTINUOUS:
        value = rmse(preds, dataset.y)
        print(f"rmse={value!r}")
    else:
        raise DataError("eval supports binary and continuous targets only")
    return 0


def _cmd_synth(args) -> int:
    planted = SubgroupCriterion.from_text(args.planted) if args.planted else None
    spec = GeneratorSpec(n=args.n, features=args.features, planted=planted,
                         effect_size=args.effect, mode=args.mode,
                         noise_seed=args.seed, outcome_kind=args.outcome,
                         base_rate=args.base_rate, noise_sd=args.noise_sd)
    dataset = generate(spec)
    write_csv(dataset, args.out, header_lines=_header_lines(args))
    if args.schema_out:
        write_schema(dataset, args.schema_out)
    print(f"wrote {args.out}: n={dataset.n}")
    return 0


def _cmd_bench(args) -> int:
    dataset = _load_dataset(args)
    sizes = tuple(int(s) for s in args.sizes.split(",") if s)
    methods = tuple(m for m in args.methods.split(",") if m)
    cfg = TreeConfig(threshold=0.2, search_depth=args.search_depth,
                     min_side=args.min_side, folds=args.folds,
                     repeats=args.repeats, seed=args.seed)
    spec = BenchmarkSpec(source=dataset, sizes=sizes, resamples=args.resamples,
                         methods=methods, seed=args.seed,
                         grid=_parse_grid(args.grid), tree_config=cfg,
                         timing=args.timing)
    report = run_benchmark(spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv(_header_lines(args)))
    print(f"wrote {args.out}: {len(report.detail_rows)} detail rows, "
          f"{len(report.summary_rows)} summary rows")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "tune": _cmd_tune,
    "prune": _cmd_prune,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    threads = args.threads
    if threads is None and os.environ.get("ZTREE_THREADS"):
        try:
            threads = int(os.environ["ZTREE_THREADS"])
        except ValueError:
            print("error: ZTREE_THREADS must be an integer", file=sys.stderr)
            return 2
    _kernels.set_threads(threads)
    try:
        return _COMMANDS[args.command](args)
    except ZTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
