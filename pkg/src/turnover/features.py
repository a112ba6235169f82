"""Mutual-information scoring of features against the label, and the
filter-style selection of the top fraction.

MI is the empirical plug-in estimate in natural-log units. The ranking is
base-invariant, so nats vs bits never changes which features survive the cut.
Zero-count cells contribute zero (the 0*log(0) = 0 convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import (
    NUMERIC,
    ORDINAL_BAND,
    Dataset,
    EmployeeRecord,
    FeatureSpec,
    Label,
    Schema,
)


class FeatureError(Exception):
    pass


@dataclass(frozen=True)
class ContingencyTable:
    """Joint counts of a discrete feature (rows) against the label (columns)."""

    x_levels: tuple[str, ...]
    y_levels: tuple[str, ...]
    counts: np.ndarray
    feature: str = ""

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (len(self.x_levels), len(self.y_levels)):
            raise FeatureError(
                f"counts shape {c.shape} does not match levels "
                f"({len(self.x_levels)} x {len(self.y_levels)})"
            )
        if np.any(c < 0):
            raise FeatureError("negative counts")
        if c.sum() <= 0:
            raise FeatureError("empty contingency table")

    def transposed(self) -> "ContingencyTable":
        return ContingencyTable(self.y_levels, self.x_levels, np.asarray(self.counts).T, self.feature)


@dataclass(frozen=True)
class FeatureScore:
    feature: str
    mi_nats: float


def contingency_table(ds: Dataset, feature: str) -> ContingencyTable:
    """Count (feature level, label) co-occurrences. Labels must be known."""
    spec = ds.schema.feature(feature)
    if spec.kind == NUMERIC:
        raise FeatureError(f"feature {feature!r} is numeric; discretize first")
    levels = spec.domain
    index = {lv: i for i, lv in enumerate(levels)}
    y_levels = (Label.ACTIVE.value, Label.TERMINATED.value)
    counts = np.zeros((len(levels), 2), dtype=np.int64)
    for r in ds.rows:
        if r.label is Label.UNKNOWN:
            raise FeatureError(f"row {r.id!r} has an Unknown label")
        counts[index[r.values[feature]], 0 if r.label is Label.ACTIVE else 1] += 1
    return ContingencyTable(levels, y_levels, counts, feature)


def mutual_information(table: ContingencyTable) -> FeatureScore:
    """Plug-in mutual information in nats over the empirical joint frequencies."""
    c = np.asarray(table.counts, dtype=float)
    total = c.sum()
    p = c / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    mask = p > 0
    mi = float(np.sum(p[mask] * np.log(p[mask] / (px @ py)[mask])))
    return FeatureScore(table.feature, max(mi, 0.0))


def entropy_nats(counts: np.ndarray) -> float:
    """Shannon entropy of a count vector, in nats."""
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    if total <= 0:
        raise FeatureError("empty count vector")
    p = c[c > 0] / total
    return float(-np.sum(p * np.log(p)))


DECLARED_BANDS = "declared_bands"
EQUAL_FREQUENCY = "equal_frequency"


@dataclass(frozen=True)
class BinningRule:
    """How to band one numeric feature.

    declared_bands carries its own cut points; equal_frequency computes k-1
    quantile edges from the dataset the discretizer is fitted on.
    """

    feature: str
    strategy: str
    bins: int = 0
    cut_points: tuple[float, ...] = ()

    def __post_init__(self):
        if self.strategy not in (DECLARED_BANDS, EQUAL_FREQUENCY):
            raise FeatureError(f"unknown binning strategy {self.strategy!r}")
        if self.strategy == EQUAL_FREQUENCY and self.bins < 2:
            raise FeatureError(f"equal_frequency needs >= 2 bins, got {self.bins}")
        if self.strategy == DECLARED_BANDS and not self.cut_points:
            raise FeatureError(f"declared_bands for {self.feature!r} needs cut points")
        if list(self.cut_points) != sorted(set(self.cut_points)):
            raise FeatureError(f"cut points for {self.feature!r} must be strictly ascending")


def _edge_labels(edges: list[float]) -> list[str]:
    def fmt(x: float) -> str:
        return f"{x:g}"

    if not edges:
        return ["all"]
    labels = [f"<={fmt(edges[0])}"]
    for lo, hi in zip(edges, edges[1:]):
        labels.append(f"{fmt(lo)}-{fmt(hi)}")
    labels.append(f">{fmt(edges[-1])}")
    return labels


@dataclass
class Discretizer:
    """Fitted banding of numeric features, reusable on other datasets.

    Equal-frequency edges are computed once from the fitting dataset and then
    applied verbatim elsewhere (train edges applied to test and prediction
    sets), which keeps banding leakage-free.
    """

    edges: dict[str, tuple[float, ...]] = field(default_factory=dict)
    labels: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @staticmethod
    def fit(ds: Dataset, rules: list[BinningRule]) -> "Discretizer":
        by_feature = {r.feature: r for r in rules}
        disc = Discretizer()
        for spec in ds.schema.features:
            if spec.kind != NUMERIC:
                continue
            rule = by_feature.get(spec.name)
            if rule is None:
                raise FeatureError(f"numeric feature {spec.name!r} has no binning rule")
            values = np.asarray(ds.column(spec.name), dtype=float)
            if rule.strategy == DECLARED_BANDS:
                edges = list(rule.cut_points)
            else:
                distinct = np.unique(values)
                if distinct.size < rule.bins:
                    raise FeatureError(
                        f"feature {spec.name!r} has {distinct.size} distinct values, "
                        f"fewer than {rule.bins} bins"
                    )
                qs = np.arange(1, rule.bins) / rule.bins
                edges = sorted(set(float(q) for q in np.quantile(values, qs)))
            disc.edges[spec.name] = tuple(edges)
            disc.labels[spec.name] = tuple(_edge_labels(edges))
        return disc

    def output_schema(self, schema: Schema) -> Schema:
        feats = []
        for spec in schema.features:
            if spec.kind == NUMERIC and spec.name in self.edges:
                feats.append(
                    FeatureSpec(
                        name=spec.name,
                        kind=ORDINAL_BAND,
                        bands=self.labels[spec.name],
                        actionable=spec.actionable,
                    )
                )
            else:
                feats.append(spec)
        return Schema(tuple(feats), schema.label_name)

    def apply(self, ds: Dataset) -> Dataset:
        """Band every fitted numeric feature; all other features pass through."""
        for spec in ds.schema.features:
            if spec.kind == NUMERIC and spec.name not in self.edges:
                raise FeatureError(f"numeric feature {spec.name!r} was not fitted")
        out_schema = self.output_schema(ds.schema)
        rows = []
        for r in ds.rows:
            updates: dict[str, str | float] = {}
            for name, edges in self.edges.items():
                if name in r.values:
                    v = float(r.values[name])
                    idx = int(np.searchsorted(np.asarray(edges), v, side="left"))
                    updates[name] = self.labels[name][idx]
            values = dict(r.values)
            values.update(updates)
            rows.append(EmployeeRecord(r.id, values, r.label, r.year))
        return Dataset(out_schema, tuple(rows))

    def to_dict(self) -> dict:
        return {
            "edges": {k: list(v) for k, v in sorted(self.edges.items())},
            "labels": {k: list(v) for k, v in sorted(self.labels.items())},
        }

    @staticmethod
    def from_dict(doc: dict) -> "Discretizer":
        d = Discretizer()
        d.edges = {k: tuple(v) for k, v in doc["edges"].items()}
        d.labels = {k: tuple(v) for k, v in doc["labels"].items()}
        return d


def discretize(ds: Dataset, rules: list[BinningRule]) -> Dataset:
    """One-shot fit-and-apply; use Discretizer.fit when edges must be reused."""
    return Discretizer.fit(ds, rules).apply(ds)


def rank_and_filter(
    ds: Dataset, keep_fraction: float
) -> tuple[list[FeatureScore], list[str]]:
    """Score every feature's MI against the label and keep the top fraction.

    Returns (scores sorted by descending MI, selected feature names). Ties at
    the cutoff are broken by ascending feature name, so selection is
    deterministic.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise FeatureError(f"keep_fraction must be in (0,1], got {keep_fraction}")
    for spec in ds.schema.features:
        if spec.kind == NUMERIC:
            raise FeatureError(f"feature {spec.name!r} is numeric; discretize first")
    scores = [mutual_information(contingency_table(ds, f)) for f in ds.schema.feature_names]
    scores.sort(key=lambda s: (-s.mi_nats, s.feature))
    kept = math.ceil(keep_fraction * len(scores))
    selected = [s.feature for s in scores[:kept]]
    return scores, selected


def score_report(scores: list[FeatureScore], selected: list[str]) -> dict:
    """Machine-readable MI ranking: ordered (feature, mi_nats, selected) triples."""
    chosen = set(selected)
    return {
        "scores": [
            {"feature": s.feature, "mi_nats": s.mi_nats, "selected": s.feature in chosen}
            for s in scores
        ]
    }


def render_score_report(scores: list[FeatureScore], selected: list[str]) -> str:
    chosen = set(selected)
    width = max(len(s.feature) for s in scores) if scores else 8
    lines = [f"{'feature':<{width}}  {'mi_nats':>10}  kept"]
    for s in scores:
        lines.append(f"{s.feature:<{width}}  {s.mi_nats:>10.6f}  {'yes' if s.feature in chosen else 'no'}")
    return "\n".join(lines) + "\n"
