"""Feature codecs mapping records onto numeric arrays for the classifiers.

Two encodings exist because the families want different inputs: Naive Bayes
and the tree family consume native integer level codes plus raw numerics,
while LDA and the SVM consume a one-hot expansion (all levels, no reference
level dropped) with numerics standardized by weighted moments.

The schema fingerprint hashes the selected features' names, kinds, and
domains; predictions are refused when a dataset's fingerprint differs from
the one the model was fitted with.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .data import NUMERIC, Dataset, Label, Schema


class EncodeError(Exception):
    pass


def schema_fingerprint(schema: Schema, selected: list[str] | tuple[str, ...]) -> str:
    """Stable hash of the selected features' contracts (name, kind, domain)."""
    doc = []
    chosen = set(selected)
    for spec in schema.features:
        if spec.name not in chosen:
            continue
        doc.append(
            {
                "name": spec.name,
                "kind": spec.kind,
                "levels": list(spec.levels),
                "bands": list(spec.bands),
            }
        )
    missing = chosen - {d["name"] for d in doc}
    if missing:
        raise EncodeError(f"selected features missing from schema: {sorted(missing)}")
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class Column:
    """One encoded feature: integer codes for discrete kinds, floats for numeric."""

    name: str
    kind: str
    levels: tuple[str, ...]  # empty for numeric


class NativeCodec:
    """Level-code / raw-numeric encoding in schema order of selected features."""

    def __init__(self, schema: Schema, selected: list[str] | tuple[str, ...]):
        chosen = set(selected)
        self.columns: list[Column] = []
        for spec in schema.features:
            if spec.name not in chosen:
                continue
            if spec.kind == NUMERIC:
                self.columns.append(Column(spec.name, NUMERIC, ()))
            else:
                self.columns.append(Column(spec.name, spec.kind, spec.domain))
        if len(self.columns) != len(chosen):
            missing = chosen - {c.name for c in self.columns}
            raise EncodeError(f"selected features missing from schema: {sorted(missing)}")

    def encode(self, ds: Dataset) -> list[np.ndarray]:
        """One array per column: int64 codes or float64 values."""
        out = []
        for col in self.columns:
            raw = ds.column(col.name)
            if col.kind == NUMERIC:
                out.append(np.asarray(raw, dtype=float))
            else:
                index = {lv: i for i, lv in enumerate(col.levels)}
                out.append(np.array([index[v] for v in raw], dtype=np.int64))
        return out


class OneHotCodec:
    """One-hot levels + numerics standardized by weighted moments (ddof 0).

    Weighted moments keep integer-weighted fits identical to fits on
    physically replicated rows.
    """

    def __init__(self, schema: Schema, selected: list[str] | tuple[str, ...]):
        self.native = NativeCodec(schema, selected)
        self.num_mean: np.ndarray | None = None
        self.num_scale: np.ndarray | None = None
        self.standardize = False
        self.feature_names: list[str] = []
        for col in self.native.columns:
            if col.kind == NUMERIC:
                self.feature_names.append(col.name)
            else:
                self.feature_names.extend(f"{col.name}={lv}" for lv in col.levels)

    @property
    def width(self) -> int:
        return len(self.feature_names)

    def fit_standardizer(self, ds: Dataset, weights: np.ndarray) -> None:
        cols = self.native.encode(ds)
        means, scales = [], []
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        for col, arr in zip(self.native.columns, cols):
            if col.kind != NUMERIC:
                continue
            mu = float(np.dot(w, arr) / total)
            var = float(np.dot(w, (arr - mu) ** 2) / total)
            sd = var ** 0.5
            means.append(mu)
            scales.append(sd if sd > 0 else 1.0)
        self.num_mean = np.asarray(means)
        self.num_scale = np.asarray(scales)
        self.standardize = True

    def encode(self, ds: Dataset) -> np.ndarray:
        cols = self.native.encode(ds)
        n = len(ds.rows)
        blocks = []
        num_seen = 0
        for col, arr in zip(self.native.columns, cols):
            if col.kind == NUMERIC:
                vals = arr.astype(float)
                if self.standardize:
                    vals = (vals - self.num_mean[num_seen]) / self.num_scale[num_seen]
                num_seen += 1
                blocks.append(vals[:, None])
            else:
                hot = np.zeros((n, len(col.levels)))
                hot[np.arange(n), arr] = 1.0
                blocks.append(hot)
        return np.hstack(blocks) if blocks else np.zeros((n, 0))

    def state(self) -> dict:
        return {
            "num_mean": self.num_mean.tolist() if self.num_mean is not None else None,
            "num_scale": self.num_scale.tolist() if self.num_scale is not None else None,
            "standardize": self.standardize,
        }

    def load_state(self, doc: dict) -> None:
        self.num_mean = np.asarray(doc["num_mean"]) if doc["num_mean"] is not None else None
        self.num_scale = np.asarray(doc["num_scale"]) if doc["num_scale"] is not None else None
        self.standardize = bool(doc["standardize"])


def labels01(ds: Dataset) -> np.ndarray:
    """Labels as 0 (Active) / 1 (Terminated); Unknown labels are refused."""
    out = np.empty(len(ds.rows), dtype=np.int64)
    for i, r in enumerate(ds.rows):
        if r.label is Label.UNKNOWN:
            raise EncodeError(f"row {r.id!r} has an Unknown label")
        out[i] = 1 if r.label is Label.TERMINATED else 0
    return out
