"""Employee population schema, ingestion, curation, and stratified splitting.

A Dataset is immutable after construction: every operation returns a new
Dataset and never mutates rows in place, so shared read-only use across
threads is safe.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CATEGORICAL = "categorical"
NUMERIC = "numeric"
ORDINAL_BAND = "ordinal_band"

_KINDS = (CATEGORICAL, NUMERIC, ORDINAL_BAND)


class DataError(Exception):
    """Base error for schema/dataset violations."""


class SchemaError(DataError):
    pass


class LoadError(DataError):
    """Ingestion failure, annotated with the offending row and column."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class Label(str, Enum):
    ACTIVE = "Active"
    TERMINATED = "Terminated"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class FeatureSpec:
    """One column of the employee schema.

    kind is one of:
      categorical:  unordered levels
      numeric:      finite real, optional unit label
      ordinal_band: ordered band labels; cut_points, when given, band raw
                     numeric cell values at load time (len(bands) - 1 edges,
                     right-closed intervals)
    """

    name: str
    kind: str
    levels: tuple[str, ...] = ()
    bands: tuple[str, ...] = ()
    unit: str = ""
    cut_points: tuple[float, ...] = ()
    actionable: bool = False

    def __post_init__(self):
        if not self.name:
            raise SchemaError("feature name must be non-empty")
        if self.kind not in _KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"categorical feature {self.name!r} needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"duplicate levels in feature {self.name!r}")
        if self.kind == ORDINAL_BAND:
            if not self.bands:
                raise SchemaError(f"ordinal feature {self.name!r} needs at least one band")
            if len(set(self.bands)) != len(self.bands):
                raise SchemaError(f"duplicate bands in feature {self.name!r}")
            if self.cut_points and len(self.cut_points) != len(self.bands) - 1:
                raise SchemaError(
                    f"feature {self.name!r}: {len(self.bands)} bands need "
                    f"{len(self.bands) - 1} cut points, got {len(self.cut_points)}"
                )
            if list(self.cut_points) != sorted(self.cut_points):
                raise SchemaError(f"cut points for {self.name!r} must be ascending")

    @property
    def domain(self) -> tuple[str, ...]:
        """Valid string values: levels for categorical, bands for ordinal."""
        if self.kind == CATEGORICAL:
            return self.levels
        if self.kind == ORDINAL_BAND:
            return self.bands
        return ()

    def band_for(self, value: float) -> str:
        """Band a raw numeric value using the declared cut points (right-closed)."""
        if self.kind != ORDINAL_BAND or not self.cut_points:
            raise SchemaError(f"feature {self.name!r} has no cut points")
        idx = int(np.searchsorted(np.asarray(self.cut_points), value, side="left"))
        return self.bands[idx]


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    label_name: str = "status"

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")
        if self.label_name in names:
            raise SchemaError(f"label name {self.label_name!r} collides with a feature")

    def feature(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise SchemaError(f"no feature named {name!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def drop(self, name: str) -> "Schema":
        kept = tuple(f for f in self.features if f.name != name)
        if len(kept) == len(self.features):
            raise SchemaError(f"no feature named {name!r}")
        return Schema(kept, self.label_name)

    def replace(self, spec: FeatureSpec) -> "Schema":
        feats = tuple(spec if f.name == spec.name else f for f in self.features)
        return Schema(feats, self.label_name)

    def to_dict(self) -> dict:
        return {
            "label_name": self.label_name,
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "levels": list(f.levels),
                    "bands": list(f.bands),
                    "unit": f.unit,
                    "cut_points": list(f.cut_points),
                    "actionable": f.actionable,
                }
                for f in self.features
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "Schema":
        feats = tuple(
            FeatureSpec(
                name=fd["name"],
                kind=fd["kind"],
                levels=tuple(fd.get("levels", ())),
                bands=tuple(fd.get("bands", ())),
                unit=fd.get("unit", ""),
                cut_points=tuple(fd.get("cut_points", ())),
                actionable=bool(fd.get("actionable", False)),
            )
            for fd in doc["features"]
        )
        return Schema(feats, doc.get("label_name", "status"))


def save_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2, sort_keys=True) + "\n")


def load_schema(path: str | Path) -> Schema:
    return Schema.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EmployeeRecord:
    id: str
    values: dict[str, str | float]
    label: Label
    year: int

    def value(self, name: str):
        return self.values[name]

    def with_values(self, updates: dict[str, str | float]) -> "EmployeeRecord":
        merged = dict(self.values)
        merged.update(updates)
        return EmployeeRecord(self.id, merged, self.label, self.year)

    def with_label(self, label: Label) -> "EmployeeRecord":
        return EmployeeRecord(self.id, dict(self.values), label, self.year)


def _validate_value(spec: FeatureSpec, raw, row: int | None = None):
    """Coerce and validate one cell against its FeatureSpec."""
    if spec.kind == NUMERIC:
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise LoadError(f"non-numeric value {raw!r}", row, spec.name)
        if not math.isfinite(v):
            raise LoadError(f"non-finite value {raw!r}", row, spec.name)
        return v
    value = raw if isinstance(raw, str) else str(raw)
    if spec.kind == ORDINAL_BAND and spec.cut_points and value not in spec.bands:
        # allow raw numerics for banded-at-ingestion columns
        try:
            return spec.band_for(float(value))
        except ValueError:
            raise LoadError(f"value {value!r} is neither a band nor a number", row, spec.name)
    if value not in spec.domain:
        raise LoadError(f"value {value!r} not among declared levels", row, spec.name)
    return value


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    rows: tuple[EmployeeRecord, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for i, row in enumerate(self.rows):
            if row.id in seen:
                raise LoadError(f"duplicate id {row.id!r}", row=i + 1)
            seen.add(row.id)
            if set(row.values) != set(self.schema.feature_names):
                missing = set(self.schema.feature_names) - set(row.values)
                extra = set(row.values) - set(self.schema.feature_names)
                raise LoadError(
                    f"row values do not match schema (missing {sorted(missing)}, extra {sorted(extra)})",
                    row=i + 1,
                )
            for spec in self.schema.features:
                _validate_value(spec, row.values[spec.name], row=i + 1)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [r.values[name] for r in self.rows]

    def labels(self) -> list[Label]:
        return [r.label for r in self.rows]

    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.rows[i] for i in indices))

    def replace_rows(self, rows: Sequence[EmployeeRecord]) -> "Dataset":
        return Dataset(self.schema, tuple(rows))


def load_dataset(source, schema: Schema) -> Dataset:
    """Parse header-bearing comma-delimited text into a validated Dataset.

    source may be a path, a text stream, or a byte stream. Expected columns:
    ``id``, ``year``, the schema's label column, and one column per feature
    (any order). Rows are numbered from 1 (the header is row 0) in errors.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        raise LoadError(f"unsupported source type {type(source).__name__}")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LoadError("empty input: no header row")

    expected = {"id", "year", schema.label_name, *schema.feature_names}
    got = set(header)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise LoadError(f"header mismatch (missing {missing}, unexpected {extra})")
    if len(set(header)) != len(header):
        raise LoadError("duplicate column names in header")
    col = {name: i for i, name in enumerate(header)}

    rows: list[EmployeeRecord] = []
    seen: set[str] = set()
    valid_labels = {l.value for l in Label}
    for n, record in enumerate(reader, start=1):
        if not record:
            continue
        if len(record) != len(header):
            raise LoadError(f"expected {len(header)} fields, got {len(record)}", row=n)
        rid = record[col["id"]]
        if not rid:
            raise LoadError("empty id", row=n, column="id")
        if rid in seen:
            raise LoadError(f"duplicate id {rid!r}", row=n, column="id")
        seen.add(rid)
        try:
            year = int(record[col["year"]])
        except ValueError:
            raise LoadError(f"non-integer year {record[col['year']]!r}", row=n, column="year")
        raw_label = record[col[schema.label_name]]
        if raw_label not in valid_labels:
            raise LoadError(f"unknown label {raw_label!r}", row=n, column=schema.label_name)
        values = {
            spec.name: _validate_value(spec, record[col[spec.name]], row=n)
            for spec in schema.features
        }
        rows.append(EmployeeRecord(rid, values, Label(raw_label), year))
    return Dataset(schema, tuple(rows))


def save_dataset(ds: Dataset, dest) -> None:
    """Write a Dataset as comma-delimited text (inverse of load_dataset)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["id", "year", ds.schema.label_name] + list(ds.schema.feature_names)
    writer.writerow(header)
    for r in ds.rows:
        cells = [r.id, str(r.year), r.label.value]
        for spec in ds.schema.features:
            v = r.values[spec.name]
            cells.append(repr(v) if isinstance(v, float) else v)
        writer.writerow(cells)
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)


EXIT_REASONS = ("voluntary", "involuntary", "retirement", "none")


def curate_scope(ds: Dataset, exit_reason_column: str) -> Dataset:
    """Restrict the population to voluntary-turnover scope.

    Rows whose exit reason is involuntary or retirement are dropped; voluntary
    exits become Terminated and 'none' becomes Active. The exit-reason column
    is consumed: it defines the label, so it is removed from the result.
    """
    spec = ds.schema.feature(exit_reason_column)
    out_schema = ds.schema.drop(exit_reason_column)
    rows: list[EmployeeRecord] = []
    for i, r in enumerate(ds.rows):
        reason = r.values[exit_reason_column]
        if reason not in EXIT_REASONS:
            raise LoadError(
                f"unrecognized exit reason {reason!r}", row=i + 1, column=spec.name
            )
        if reason in ("involuntary", "retirement"):
            continue
        label = Label.TERMINATED if reason == "voluntary" else Label.ACTIVE
        values = {k: v for k, v in r.values.items() if k != exit_reason_column}
        rows.append(EmployeeRecord(r.id, values, label, r.year))
    return Dataset(out_schema, tuple(rows))


def _largest_remainder(targets: list[float], total: int) -> list[int]:
    """Integer allocation: floors plus largest fractional remainders, summing to total."""
    floors = [math.floor(t) for t in targets]
    short = total - sum(floors)
    order = sorted(range(len(targets)), key=lambda i: (-(targets[i] - floors[i]), i))
    out = list(floors)
    for i in order[:short]:
        out[i] += 1
    return out


def split_stratified(
    ds: Dataset, fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split into two partitions preserving (label, year) strata proportions.

    The first partition receives round(fraction * n) rows overall, allocated
    hierarchically (labels first, then years within label) by largest
    remainder so every stratum lands within one row of proportionality.
    Deterministic per seed; the union of the partitions equals the input.
    """
    if not (0.0 < fraction < 1.0):
        raise DataError(f"fraction must be in (0,1), got {fraction}")
    n = len(ds.rows)
    if n == 0:
        raise DataError("cannot split an empty dataset")

    strata: dict[tuple[str, int], list[int]] = {}
    for i, r in enumerate(ds.rows):
        strata.setdefault((r.label.value, r.year), []).append(i)

    total_take = math.floor(fraction * n + 0.5)

    label_keys = sorted({k[0] for k in strata})
    label_sizes = {
        lk: sum(len(v) for k, v in strata.items() if k[0] == lk) for lk in label_keys
    }
    label_take = dict(
        zip(
            label_keys,
            _largest_remainder([fraction * label_sizes[lk] for lk in label_keys], total_take),
        )
    )

    rng = np.random.default_rng(seed)
    first_idx: set[int] = set()
    for lk in label_keys:
        year_keys = sorted(k[1] for k in strata if k[0] == lk)
        takes = _largest_remainder(
            [fraction * len(strata[(lk, yk)]) for yk in year_keys], label_take[lk]
        )
        for yk, take in zip(year_keys, takes):
            members = np.array(strata[(lk, yk)])
            rng.shuffle(members)
            first_idx.update(members[:take].tolist())

    first = [i for i in range(n) if i in first_idx]
    second = [i for i in range(n) if i not in first_idx]
    return ds.subset(first), ds.subset(second)
