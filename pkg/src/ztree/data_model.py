"""Typed in-memory dataset, CSV ingestion, and percentile-based cutoff candidates."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError

CONTINUOUS = "continuous"
NOMINAL = "nominal"
ORDINAL = "ordinal"

BINARY = "binary"
TIME_TO_EVENT = "time-to-event"

NA_LEVEL = "__NA__"
MAX_CUTOFFS = 20

# Criterion text uses these tokens; column names containing them would not
# round-trip through model files.
_RESERVED_TOKENS = (">", "==", " & ", "\n", ",")


def _check_name(name: str) -> str:
    if not name:
        raise SchemaError("empty column name")
    for tok in _RESERVED_TOKENS:
        if tok in name:
            raise SchemaError(f"column name {name!r} contains reserved token {tok!r}")
    return name


@dataclass(frozen=True)
class FeatureSpec:
    """One feature column: continuous, nominal, or ordinal (ordered levels)."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        _check_name(self.name)
        if self.kind not in (CONTINUOUS, NOMINAL, ORDINAL):
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.kind == CONTINUOUS:
            if self.levels:
                raise SchemaError(f"continuous feature {self.name!r} must not declare levels")
        else:
            if len(self.levels) < 1:
                raise SchemaError(f"{self.kind} feature {self.name!r} needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"duplicate levels on feature {self.name!r}")


@dataclass(frozen=True)
class TargetSpec:
    """Target column: binary, continuous, or time-to-event (paired event indicator)."""

    name: str
    kind: str
    event_indicator_name: str | None = None

    def __post_init__(self):
        _check_name(self.name)
        if self.kind not in (BINARY, CONTINUOUS, TIME_TO_EVENT):
            raise SchemaError(f"unknown target kind {self.kind!r}")
        if self.kind == TIME_TO_EVENT and not self.event_indicator_name:
            raise SchemaError("time-to-event target needs an event indicator column")
        if self.kind != TIME_TO_EVENT and self.event_indicator_name:
            raise SchemaError("event indicator only valid for time-to-event targets")


@dataclass(frozen=True)
class CutoffSet:
    """Candidate split points for one feature, strictly ascending, at most 20."""

    feature_name: str
    cutoffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.cutoffs) > MAX_CUTOFFS:
            raise ValueError(f"{len(self.cutoffs)} cutoffs exceed the maximum of {MAX_CUTOFFS}")
        if any(b <= a for a, b in zip(self.cutoffs, self.cutoffs[1:])):
            raise ValueError("cutoffs must be strictly ascending")


class Dataset:
    """Immutable columnar dataset: typed features, one target, optional treatment.

    Feature columns are float64 for continuous features and int32 level codes
    for nominal/ordinal ones (codes index into the FeatureSpec levels).  All
    arrays are frozen after construction and safe to share across threads.
    """

    def __init__(self, features, columns, target, y, events=None, treatment=None,
                 treatment_name=None):
        self.features = list(features)
        self.target = target
        names = [f.name for f in self.features]
        reserved = {target.name, target.event_indicator_name, treatment_name} - {None}
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if set(names) & reserved:
            raise SchemaError("feature names collide with target/treatment columns")

        self.n = int(len(y))
        self.columns = {}
        for spec in self.features:
            col = np.asarray(columns[spec.name])
            if spec.kind == CONTINUOUS:
                col = col.astype(np.float64)
            else:
                col = col.astype(np.int32)
                if col.size and (col.min() < 0 or col.max() >= len(spec.levels)):
                    raise DataError(f"level code out of range on feature {spec.name!r}")
            if len(col) != self.n:
                raise DataError(f"column {spec.name!r} length {len(col)} != n={self.n}")
            self.columns[spec.name] = col

        if target.kind == BINARY:
            y = np.asarray(y, dtype=np.int8)
            if self.n and not set(np.unique(y)) <= {0, 1}:
                raise DataError("binary target must be coded 0/1")
        else:
            y = np.asarray(y, dtype=np.float64)
        self.y = y

        self.events = None
        if target.kind == TIME_TO_EVENT:
            if events is None:
                raise DataError("time-to-event target needs event indicators")
            events = np.asarray(events, dtype=np.int8)
            if len(events) != self.n:
                raise DataError("event column length mismatch")
            if self.n and not set(np.unique(events)) <= {0, 1}:
                raise DataError("event indicator must be coded 0/1")
            if self.n and self.y.min() < 0:
                raise DataError("time-to-event times must be nonnegative")
            self.events = events

        self.treatment = None
        self.treatment_name = treatment_name
        if treatment is not None:
            treatment = np.asarray(treatment, dtype=np.int8)
            if len(treatment) != self.n:
                raise DataError("treatment column length mismatch")
            if set(np.unique(treatment)) != {0, 1}:
                raise DataError("treatment column must contain both values 0 and 1")
            self.treatment = treatment
            if treatment_name is None:
                self.treatment_name = "treatment"

        for arr in self._arrays():
            arr.flags.writeable = False

    def _arrays(self):
        out = list(self.columns.values()) + [self.y]
        if self.events is not None:
            out.append(self.events)
        if self.treatment is not None:
            out.append(self.treatment)
        return out

    @property
    def has_treatment(self) -> bool:
        return self.treatment is not None

    def feature(self, name: str) -> FeatureSpec:
        for spec in self.features:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def subset(self, index) -> "Dataset":
        """New Dataset holding the selected rows (row order preserved)."""
        cols = {name: col[index] for name, col in self.columns.items()}
        return Dataset(
            self.features, cols, self.target, self.y[index],
            events=None if self.events is None else self.events[index],
            treatment=None if self.treatment is None else self.treatment[index],
            treatment_name=self.treatment_name,
        )

    def schema_dict(self) -> dict:
        return {
            "features": [
                {"name": f.name, "kind": f.kind, "levels": list(f.levels)}
                for f in self.features
            ],
            "target": {
                "name": self.target.name,
                "kind": self.target.kind,
                "event_indicator_name": self.target.event_indicator_name,
            },
            "treatment": self.treatment_name if self.has_treatment else None,
        }

    def schema_fingerprint(self) -> str:
        blob = json.dumps(self.schema_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def equals(self, other: "Dataset") -> bool:
        if self.features != other.features or self.target != other.target:
            return False
        if self.treatment_name != other.treatment_name or self.n != other.n:
            return False
        if not all(np.array_equal(self.columns[f.name], other.columns[f.name])
                   for f in self.features):
            return False
        if not np.array_equal(self.y, other.y):
            return False
        if (self.events is None) != (other.events is None):
            return False
        if self.events is not None and not np.array_equal(self.events, other.events):
            return False
        if (self.treatment is None) != (other.treatment is None):
            return False
        if self.treatment is not None and not np.array_equal(self.treatment, other.treatment):
            return False
        return True


def compute_cutoffs(values) -> np.ndarray:
    """Candidate cutoffs: nearest-rank percentiles at 5%, 10%, ..., 95%.

    The percentile at level q is the sorted value at index ceil(q*n) (1-based),
    so every cutoff is an observed value.  Values equal to the column maximum
    are dropped (a `> max` split would be empty) and duplicates collapse, which
    bounds the result at 19 cutoffs.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise DataError("cannot compute cutoffs of an empty column")
    srt = np.sort(vals)
    n = srt.size
    ks = np.arange(1, 20, dtype=np.int64)  # q = k/20
    idx = -(-(ks * n) // 20) - 1  # exact ceil(q*n), 0-based
    cand = np.unique(srt[idx])
    return cand[cand < srt[-1]]


def read_schema_file(path) -> dict[str, str]:
    """Parse a `column = role` override file (see ingest_csv for role syntax)."""
    overrides: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'column = role'")
            name, role = line.split("=", 1)
            name, role = name.strip(), role.strip()
            if not name or not role:
                raise SchemaError(f"{path}:{lineno}: empty column or role")
            if name in overrides:
                raise SchemaError(f"{path}:{lineno}: duplicate entry for {name!r}")
            overrides[name] = role
    return overrides


def _read_csv(path):
    """Header + data rows; leading lines starting with '#' (artifact header
    preamble) are skipped."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = iter(fh)
            header_line = None
            for line in lines:
                if not line.startswith("#"):
                    header_line = line
                    break
            if header_line is None:
                raise DataError(f"{path}: empty file, header row required")
            reader = csv.reader([header_line] + list(lines))
            table = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in table[0]]
    rows = table[1:]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    for row in rows:
        if len(row) != len(header):
            raise DataError(f"{path}: row with {len(row)} cells, header has {len(header)}")
    return header, rows


def read_csv_columns(path) -> dict[str, list[str]]:
    """Raw string cells per column (prediction-time feature input)."""
    header, rows = _read_csv(path)
    return {name: [row[i].strip() for row in rows] for i, name in enumerate(header)}


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return not math.isnan(float(cell))


def _parse_role(role: str):
    """Split a role string into (kind, args)."""
    parts = [p.strip() for p in role.split(":")]
    return parts[0], parts[1:]


def ingest_csv(path, target=None, schema=None, na_policy="error",
               treatment=None, target_kind=None, positive_label=None,
               na_values=frozenset({""})):
    """Read an RFC-4180 CSV (header row required, UTF-8) into a Dataset.

    Column typing: a column whose every non-missing cell parses as a number is
    continuous unless overridden; any other column is nominal; ordinal is only
    available via an explicit override that declares the level order.

    Args:
        path: CSV file path.
        target: target column name (may instead come from the schema).
        schema: mapping column -> role, where role is one of
            ``continuous``, ``nominal``, ``ordinal: a < b < c``,
            ``target: binary|continuous|time-to-event[: event_column]``,
            ``treatment``, ``ignore``.  Usually produced by read_schema_file.
        na_policy: ``error`` aborts on any missing cell; ``drop-rows`` removes
            rows with a missing cell in any used column; ``na-level`` maps
            missing nominal cells to the reserved level ``__NA__`` (missing
            continuous/ordinal/target/treatment cells still drop the row).
        treatment: treatment column name ({0,1} valued).
        target_kind: binary | continuous | time-to-event; inferred as binary
            when the target has exactly two observed values, else continuous.
        positive_label: raw label mapped to 1 for binary targets; defaults to
            the lexicographically larger of the two observed labels.
        na_values: cell strings treated as missing.
    """
    if na_policy not in ("error", "drop-rows", "na-level"):
        raise DataError(f"unknown na_policy {na_policy!r}")
    schema = dict(schema or {})
    header, rows = _read_csv(path)

    # Resolve roles.  Explicit arguments win over the schema file.
    event_col = None
    ignored: set[str] = set()
    feature_kind: dict[str, tuple[str, tuple[str, ...]]] = {}
    for name, role in schema.items():
        if name not in header:
            raise SchemaError(f"schema references unknown column {name!r}")
        kind, args = _parse_role(role)
        if kind == "ignore":
            ignored.add(name)
        elif kind == "treatment":
            treatment = treatment or name
        elif kind == "target":
            if target is None:
                target = name
            if name == target:
                if not args:
                    raise SchemaError(f"target role for {name!r} must name a kind")
                target_kind = target_kind or args[0]
                if target_kind == TIME_TO_EVENT:
                    if len(args) < 2:
                        raise SchemaError("time-to-event target role needs an event column")
                    event_col = args[1]
        elif kind == CONTINUOUS:
            feature_kind[name] = (CONTINUOUS, ())
        elif kind == NOMINAL:
            feature_kind[name] = (NOMINAL, ())
        elif kind == ORDINAL:
            if not args:
                raise SchemaError(f"ordinal role for {name!r} must declare levels a < b < c")
            levels = tuple(s.strip() for s in args[0].split("<"))
            if any(not s for s in levels):
                raise SchemaError(f"bad ordinal levels for {name!r}")
            feature_kind[name] = (ORDINAL, levels)
        else:
            raise SchemaError(f"unknown role {role!r} for column {name!r}")

    if target is None:
        raise DataError("no target column named (flag or schema)")
    if target not in header:
        raise DataError(f"unknown target column {target!r}")
    if treatment is not None and treatment not in header:
        raise DataError(f"unknown treatment column {treatment!r}")
    if event_col is not None and event_col not in header:
        raise DataError(f"unknown event indicator column {event_col!r}")
    if target_kind == TIME_TO_EVENT and event_col is None:
        raise DataError("time-to-event target needs an event indicator column")

    special = {target, treatment, event_col} - {None}
    feature_names = [h for h in header if h not in special and h not in ignored]
    col_idx = {h: i for i, h in enumerate(header)}

    used = feature_names + sorted(special)
    missing_mask = np.zeros(len(rows), dtype=bool)
    cells = {name: [row[col_idx[name]].strip() for row in rows] for name in used}
    is_missing = {name: [c in na_values for c in cells[name]] for name in used}

    # Columns whose missing cells survive under na-level: nominal features only.
    def column_is_nominal(name):
        if name in feature_kind:
            return feature_kind[name][0] in (NOMINAL,)
        present = [c for c, m in zip(cells[name], is_missing[name]) if not m]
        return not all(_is_float(c) for c in present)

    for name in used:
        col_missing = np.asarray(is_missing[name])
        if not col_missing.any():
            continue
        if na_policy == "error":
            first = int(np.argmax(col_missing))
            raise DataError(f"missing cell in column {name!r} at data row {first} "
                            f"(na_policy=error)")
        if na_policy == "na-level" and name in feature_names and column_is_nominal(name):
            continue  # handled below by the reserved level
        missing_mask |= col_missing

    keep = ~missing_mask
    if not keep.any():
        raise DataError("all rows dropped by the missing-data policy")
    for name in used:
        cells[name] = [c for c, k in zip(cells[name], keep) if k]
        is_missing[name] = [m for m, k in zip(is_missing[name], keep) if k]
    n = int(keep.sum())

    # Feature typing.
    features: list[FeatureSpec] = []
    columns: dict[str, np.ndarray] = {}
    for name in feature_names:
        col_cells = cells[name]
        col_miss = is_missing[name]
        kind, declared_levels = feature_kind.get(name, (None, ()))
        if kind is None:
            kind = CONTINUOUS if all(_is_float(c) for c in col_cells) else NOMINAL
        if kind == CONTINUOUS:
            if any(col_miss):
                raise DataError(f"missing continuous cell survived policy in {name!r}")
            try:
                columns[name] = np.array([float(c) for c in col_cells])
            except ValueError as exc:
                raise DataError(f"non-numeric cell in continuous column {name!r}") from exc
            features.append(FeatureSpec(name, CONTINUOUS))
        elif kind == ORDINAL:
            if any(col_miss):
                raise DataError(f"missing ordinal cell survived policy in {name!r}")
            code = {lev: i for i, lev in enumerate(declared_levels)}
            try:
                columns[name] = np.array([code[c] for c in col_cells], dtype=np.int32)
            except KeyError as exc:
                raise SchemaError(f"value {exc.args[0]!r} in ordinal column {name!r} "
                                  f"not in declared levels") from None
            features.append(FeatureSpec(name, ORDINAL, declared_levels))
        else:
            vals = [NA_LEVEL if m else c for c, m in zip(col_cells, col_miss)]
            levels = tuple(sorted(set(vals)))
            code = {lev: i for i, lev in enumerate(levels)}
            columns[name] = np.array([code[v] for v in vals], dtype=np.int32)
            features.append(FeatureSpec(name, NOMINAL, levels))

    # Target.
    t_cells = cells[target]
    if target_kind is None:
        target_kind = BINARY if len(set(t_cells)) == 2 else CONTINUOUS
    if target_kind == BINARY:
        observed = sorted(set(t_cells))
        if len(observed) != 2:
            raise DataError(f"binary target with {len(observed)} observed values")
        if positive_label is None:
            positive_label = observed[1]
        elif positive_label not in observed:
            raise DataError(f"positive label {positive_label!r} not observed in target")
        y = np.array([1 if c == positive_label else 0 for c in t_cells], dtype=np.int8)
        tspec = TargetSpec(target, BINARY)
        events = None
    elif target_kind == CONTINUOUS:
        if not all(_is_float(c) for c in t_cells):
            raise DataError(f"non-numeric cell in continuous target {target!r}")
        y = np.array([float(c) for c in t_cells])
        tspec = TargetSpec(target, CONTINUOUS)
        events = None
    elif target_kind == TIME_TO_EVENT:
        if not all(_is_float(c) for c in t_cells):
            raise DataError(f"non-numeric time in target {target!r}")
        y = np.array([float(c) for c in t_cells])
        ev_cells = cells[event_col]
        if not set(ev_cells) <= {"0", "1"}:
            raise DataError(f"event indicator {event_col!r} must be 0/1")
        events = np.array([int(c) for c in ev_cells], dtype=np.int8)
        tspec = TargetSpec(target, TIME_TO_EVENT, event_indicator_name=event_col)
    else:
        raise DataError(f"unknown target kind {target_kind!r}")

    trt = None
    if treatment is not None:
        tr_cells = cells[treatment]
        if not set(tr_cells) <= {"0", "1"}:
            raise DataError(f"treatment column {treatment!r} must be 0/1")
        trt = np.array([int(c) for c in tr_cells], dtype=np.int8)

    return Dataset(features, columns, tspec, y, events=events,
                   treatment=trt, treatment_name=treatment)


def _format_cell(value, spec: FeatureSpec | None) -> str:
    if spec is not None and spec.kind != CONTINUOUS:
        return spec.levels[int(value)]
    return repr(float(value))


def write_csv(dataset: Dataset, path, header_lines=()) -> None:
    """Write the dataset back to CSV; ingest(write(ds)) reproduces ds exactly
    when paired with write_schema output.  header_lines become a '#' preamble."""
    header = [f.name for f in dataset.features] + [dataset.target.name]
    if dataset.target.kind == TIME_TO_EVENT:
        header.append(dataset.target.event_indicator_name)
    if dataset.has_treatment:
        header.append(dataset.treatment_name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [_format_cell(dataset.columns[f.name][i], f) for f in dataset.features]
            if dataset.target.kind == BINARY:
                row.append(str(int(dataset.y[i])))
            else:
                row.append(repr(float(dataset.y[i])))
            if dataset.target.kind == TIME_TO_EVENT:
                row.append(str(int(dataset.events[i])))
            if dataset.has_treatment:
                row.append(str(int(dataset.treatment[i])))
            writer.writerow(row)


def write_schema(dataset: Dataset, path) -> None:
    """Write the override file that makes ingest_csv reproduce this dataset."""
    lines = []
    for f in dataset.features:
        if f.kind == ORDINAL:
            lines.append(f"{f.name} = ordinal: {' < '.join(f.levels)}")
        else:
            lines.append(f"{f.name} = {f.kind}")
    t = dataset.target
    if t.kind == TIME_TO_EVENT:
        lines.append(f"{t.name} = target: time-to-event: {t.event_indicator_name}")
    else:
        lines.append(f"{t.name} = target: {t.kind}")
    if dataset.has_treatment:
        lines.append(f"{dataset.treatment_name} = treatment")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
