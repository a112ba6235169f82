"""Class-imbalance correction for training partitions.

All methods are deterministic per seed and only ever applied to training
data; resampled rows get fresh derived ids so id uniqueness survives
duplication. Synthetic SMOTE rows interpolate numeric features between a
minority row and one of its k nearest minority neighbours (standardized
Euclidean plus simple matching on categoricals, equally weighted);
categorical values are copied from the seed row. ROSE draws a class-balanced
smoothed bootstrap: numeric features are jittered with a Gaussian kernel of
bandwidth shrink * sigma_cj * n_c^(-1/(d+4)), categoricals are copied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, NUMERIC, ORDINAL_BAND, Dataset, EmployeeRecord, Label, Schema


class BalanceError(Exception):
    pass


NONE = "none"
DOWN = "down"
UP = "up"
WEIGHTS = "weights"
SMOTE = "smote"
ROSE = "rose"

_VARIANTS = (NONE, DOWN, UP, WEIGHTS, SMOTE, ROSE)


@dataclass(frozen=True)
class ResamplingMethod:
    variant: str
    seed: int = 0
    k_neighbors: int = 5
    shrink: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise BalanceError(f"unknown resampling variant {self.variant!r}")
        if self.variant == SMOTE and self.k_neighbors < 1:
            raise BalanceError("SMOTE needs k_neighbors >= 1")
        if self.variant == ROSE and self.shrink <= 0:
            raise BalanceError("ROSE needs shrink > 0")

    @property
    def name(self) -> str:
        return self.variant

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "k_neighbors": self.k_neighbors,
            "shrink": self.shrink,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ResamplingMethod":
        return ResamplingMethod(
            variant=doc["variant"],
            seed=int(doc.get("seed", 0)),
            k_neighbors=int(doc.get("k_neighbors", 5)),
            shrink=float(doc.get("shrink", 1.0)),
        )


@dataclass(frozen=True)
class WeightedDataset:
    dataset: Dataset
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.dataset.rows):
            raise BalanceError("one weight per row required")
        if any(w <= 0 for w in self.weights):
            raise BalanceError("weights must be strictly positive")

    @staticmethod
    def unit(ds: Dataset) -> "WeightedDataset":
        return WeightedDataset(ds, (1.0,) * len(ds.rows))


def _split_classes(ds: Dataset) -> tuple[list[int], list[int]]:
    active, terminated = [], []
    for i, r in enumerate(ds.rows):
        if r.label is Label.UNKNOWN:
            raise BalanceError(f"row {r.id!r} has an Unknown label")
        (terminated if r.label is Label.TERMINATED else active).append(i)
    if not active or not terminated:
        raise BalanceError("both classes must be present")
    return active, terminated


def _numeric_and_categorical(schema: Schema) -> tuple[list[str], list[str]]:
    num = [f.name for f in schema.features if f.kind == NUMERIC]
    cat = [f.name for f in schema.features if f.kind in (CATEGORICAL, ORDINAL_BAND)]
    return num, cat


def smote_synthesize(
    minority_rows: list[EmployeeRecord],
    k: int,
    count: int,
    seed: int,
    schema: Schema | None = None,
) -> list[EmployeeRecord]:
    """Build `count` synthetic minority rows by seed-neighbour interpolation.

    Without a schema, feature kinds are inferred from value types (floats are
    numeric), which is reliable for schema-validated rows.
    """
    if len(minority_rows) <= k:
        raise BalanceError(
            f"need more than k={k} minority rows, got {len(minority_rows)}"
        )
    if schema is not None:
        num_names, cat_names = _numeric_and_categorical(schema)
    else:
        first = minority_rows[0].values
        num_names = [n for n, v in first.items() if isinstance(v, float)]
        cat_names = [n for n, v in first.items() if not isinstance(v, float)]

    n = len(minority_rows)
    num = np.array([[r.values[f] for f in num_names] for r in minority_rows], dtype=float) \
        if num_names else np.zeros((n, 0))
    cat = [[r.values[f] for f in cat_names] for r in minority_rows]

    mu = num.mean(axis=0) if num.size else np.zeros(0)
    sd = num.std(axis=0) if num.size else np.zeros(0)
    safe = np.where(sd > 0, sd, 1.0)
    z = (num - mu) / safe

    d2 = np.zeros((n, n))
    if num_names:
        diff = z[:, None, :] - z[None, :, :]
        d2 += np.einsum("ijk,ijk->ij", diff, diff)
    for j in range(len(cat_names)):
        col = np.array([row[j] for row in cat])
        d2 += (col[:, None] != col[None, :]).astype(float)
    np.fill_diagonal(d2, np.inf)
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    out: list[EmployeeRecord] = []
    for i in range(count):
        s = int(rng.integers(0, n))
        nb = int(neighbors[s, int(rng.integers(0, k))])
        t = float(rng.uniform())
        seed_row = minority_rows[s]
        values = dict(seed_row.values)
        for j, fname in enumerate(num_names):
            values[fname] = float(num[s, j] + t * (num[nb, j] - num[s, j]))
        out.append(
            EmployeeRecord(f"{seed_row.id}~sm{i}", values, seed_row.label, seed_row.year)
        )
    return out


def _rose_rows(
    ds: Dataset, class_indices: list[int], label: Label, count: int,
    shrink: float, rng: np.random.Generator, tag: str,
) -> list[EmployeeRecord]:
    num_names, _ = _numeric_and_categorical(ds.schema)
    d = len(num_names)
    n_c = len(class_indices)
    if d:
        mat = np.array(
            [[ds.rows[i].values[f] for f in num_names] for i in class_indices], dtype=float
        )
        sigma = mat.std(axis=0)
        bandwidth = shrink * sigma * n_c ** (-1.0 / (d + 4))
    out = []
    picks = rng.integers(0, n_c, size=count)
    for i, pick in enumerate(picks):
        src = ds.rows[class_indices[int(pick)]]
        values = dict(src.values)
        if d:
            jitter = rng.normal(size=d) * bandwidth
            for j, fname in enumerate(num_names):
                values[fname] = float(mat[int(pick), j] + jitter[j])
        out.append(EmployeeRecord(f"{src.id}~{tag}{i}", values, label, src.year))
    return out


def rebalance(ds: Dataset, method: ResamplingMethod) -> WeightedDataset:
    """Apply one imbalance correction; see the module docstring for semantics."""
    if method.variant == NONE:
        return WeightedDataset.unit(ds)

    active, terminated = _split_classes(ds)
    minority, majority = (active, terminated) if len(active) < len(terminated) else (terminated, active)
    rng = np.random.default_rng(method.seed)

    if method.variant == DOWN:
        keep = set(minority)
        chosen = rng.choice(len(majority), size=len(minority), replace=False)
        keep.update(majority[int(i)] for i in chosen)
        return WeightedDataset.unit(ds.subset(sorted(keep)))

    if method.variant == UP:
        extra_count = len(majority) - len(minority)
        picks = rng.integers(0, len(minority), size=extra_count)
        rows = list(ds.rows)
        for i, pick in enumerate(picks):
            src = ds.rows[minority[int(pick)]]
            rows.append(EmployeeRecord(f"{src.id}~up{i}", dict(src.values), src.label, src.year))
        return WeightedDataset.unit(ds.replace_rows(rows))

    if method.variant == WEIGHTS:
        n = len(ds.rows)
        w_active = n / (2.0 * len(active))
        w_terms = n / (2.0 * len(terminated))
        weights = tuple(
            w_terms if r.label is Label.TERMINATED else w_active for r in ds.rows
        )
        return WeightedDataset(ds, weights)

    if method.variant == SMOTE:
        if len(minority) <= method.k_neighbors:
            raise BalanceError(
                f"SMOTE needs more than k={method.k_neighbors} minority rows, "
                f"got {len(minority)}"
            )
        target = len(majority)
        synthetic = smote_synthesize(
            [ds.rows[i] for i in minority],
            method.k_neighbors,
            target - len(minority),
            method.seed,
            schema=ds.schema,
        )
        kept_majority = sorted(
            majority[int(i)] for i in rng.choice(len(majority), size=target, replace=False)
        )
        keep = sorted(set(minority).union(kept_majority))
        rows = [ds.rows[i] for i in keep] + synthetic
        return WeightedDataset.unit(ds.replace_rows(rows))

    if method.variant == ROSE:
        n = len(ds.rows)
        n_terms = n // 2
        n_active = n - n_terms
        rows = _rose_rows(ds, active, Label.ACTIVE, n_active, method.shrink, rng, "ro")
        rows += _rose_rows(ds, terminated, Label.TERMINATED, n_terms, method.shrink, rng, "roT")
        return WeightedDataset.unit(ds.replace_rows(rows))

    raise BalanceError(f"unhandled variant {method.variant!r}")
