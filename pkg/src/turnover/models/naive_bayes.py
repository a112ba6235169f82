"""Weighted Naive Bayes: Laplace-smoothed level tables for discrete features,
per-class weighted Gaussians for numeric ones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import NUMERIC
from ..encode import Column

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class NBParams:
    laplace_alpha: float = 1.0

    def __post_init__(self):
        if self.laplace_alpha < 0:
            raise ValueError(f"laplace_alpha must be >= 0, got {self.laplace_alpha}")


@dataclass
class FittedNB:
    priors: np.ndarray                 # (2,) class weight shares, Active first
    tables: list                       # per column: (2, L) level probs or (2, 2) [mean, var]
    columns: list[Column]

    def log_joint(self, cols: list[np.ndarray]) -> np.ndarray:
        n = len(cols[0]) if cols else 0
        with np.errstate(divide="ignore"):
            ll = np.tile(np.log(self.priors), (n, 1))
            for col, table, arr in zip(self.columns, self.tables, cols):
                if col.kind == NUMERIC:
                    for c in range(2):
                        mean, var = table[c]
                        ll[:, c] += -0.5 * np.log(2 * np.pi * var) - (arr - mean) ** 2 / (2 * var)
                else:
                    ll += np.log(table[:, arr]).T
        return ll

    def predict_proba(self, cols: list[np.ndarray]) -> np.ndarray:
        ll = self.log_joint(cols)
        out = np.empty(len(ll))
        finite = np.isfinite(ll).any(axis=1)
        # rows where every class has zero likelihood fall back to the priors
        out[~finite] = self.priors[1]
        m = np.max(ll[finite], axis=1, keepdims=True)
        e = np.exp(ll[finite] - m)
        out[finite] = e[:, 1] / e.sum(axis=1)
        return out

    def to_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "tables": [np.asarray(t).tolist() for t in self.tables],
        }

    @staticmethod
    def from_dict(doc: dict, columns: list[Column]) -> "FittedNB":
        return FittedNB(
            priors=np.asarray(doc["priors"]),
            tables=[np.asarray(t) for t in doc["tables"]],
            columns=columns,
        )


def fit_nb(
    columns: list[Column], cols: list[np.ndarray], y: np.ndarray, w: np.ndarray,
    params: NBParams,
) -> FittedNB:
    alpha = params.laplace_alpha
    class_w = np.array([w[y == 0].sum(), w[y == 1].sum()])
    priors = class_w / class_w.sum()
    tables = []
    for col, arr in zip(columns, cols):
        if col.kind == NUMERIC:
            table = np.empty((2, 2))
            for c in range(2):
                mask = y == c
                wc = w[mask]
                vals = arr[mask]
                mean = float(np.dot(wc, vals) / wc.sum())
                var = float(np.dot(wc, (vals - mean) ** 2) / wc.sum())
                table[c] = (mean, max(var, _VAR_FLOOR))
            tables.append(table)
        else:
            L = len(col.levels)
            table = np.empty((2, L))
            for c in range(2):
                mask = y == c
                counts = np.bincount(arr[mask], weights=w[mask], minlength=L)
                table[c] = (counts + alpha) / (counts.sum() + alpha * L)
            tables.append(table)
    return FittedNB(priors, tables, columns)
