"""Linear discriminant analysis on one-hot encoded features.

Weighted class means, pooled weighted covariance (population convention, so
integer-weighted fits equal replicated-row fits), optional ridge on the
diagonal. One-hot blocks always make the pooled covariance singular, so a
positive ridge is required in practice; a singular matrix at ridge 0 raises
with that advice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LdaError(Exception):
    pass


@dataclass(frozen=True)
class LdaParams:
    ridge: float = 1e-3

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")


@dataclass
class FittedLda:
    coef: np.ndarray       # (2, d) discriminant directions
    const: np.ndarray      # (2,) per-class constants incl. log prior
    codec_state: dict

    def scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef.T + self.const

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        s = self.scores(X)
        m = s.max(axis=1, keepdims=True)
        e = np.exp(s - m)
        return e[:, 1] / e.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "coef": self.coef.tolist(),
            "const": self.const.tolist(),
            "codec_state": self.codec_state,
        }

    @staticmethod
    def from_dict(doc: dict) -> "FittedLda":
        return FittedLda(
            coef=np.asarray(doc["coef"]),
            const=np.asarray(doc["const"]),
            codec_state=doc["codec_state"],
        )


def fit_lda(X: np.ndarray, y: np.ndarray, w: np.ndarray, params: LdaParams,
            codec_state: dict) -> FittedLda:
    d = X.shape[1]
    total = w.sum()
    means = np.empty((2, d))
    pooled = np.zeros((d, d))
    priors = np.empty(2)
    for c in range(2):
        mask = y == c
        wc = w[mask]
        Xc = X[mask]
        priors[c] = wc.sum() / total
        means[c] = wc @ Xc / wc.sum()
        centered = Xc - means[c]
        pooled += (centered * wc[:, None]).T @ centered
    pooled /= total
    pooled[np.diag_indices(d)] += params.ridge

    try:
        np.linalg.cholesky(pooled)
    except np.linalg.LinAlgError:
        raise LdaError(
            "pooled covariance is singular; increase the ridge hyperparameter"
        )
    coef = np.linalg.solve(pooled, means.T).T
    const = -0.5 * np.einsum("cd,cd->c", means, coef) + np.log(priors)
    return FittedLda(coef, const, codec_state)
