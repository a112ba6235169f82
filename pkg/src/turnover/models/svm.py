"""RBF-kernel SVM solved by sequential minimal optimization.

The dual box constraint is per-sample (cost * row weight), which lifts class
weighting into the solver. Pair selection is the maximal-violating-pair rule:
at each step the point that most needs the offset to be larger is paired with
the one that most needs it smaller, and the solver stops when the admissible
offset interval closes to within twice the tolerance. That stopping rule is
exactly the KKT condition, so a finished solve is KKT-clean by construction.

Probabilities come from a sigmoid fitted on the training decision values by
damped Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SvmParams:
    cost: float = 1.0
    gamma: float = 0.1
    smo_tolerance: float = 1e-3
    max_passes: int = 200  # step budget scale: roughly sweeps over the data

    def __post_init__(self):
        if self.cost <= 0:
            raise ValueError(f"cost must be > 0, got {self.cost}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.smo_tolerance <= 0:
            raise ValueError(f"smo_tolerance must be > 0, got {self.smo_tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def kkt_violations(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float,
                   C: np.ndarray) -> np.ndarray:
    """Per-point violation of the soft-margin optimality conditions."""
    f = K @ (alpha * y) + b
    margin = y * f
    viol = np.empty(len(y))
    at_zero = alpha <= 0
    at_c = alpha >= C
    interior = ~at_zero & ~at_c
    viol[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    viol[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    viol[interior] = np.abs(1.0 - margin[interior])
    return viol


class _Smo:
    """Two-variable coordinate ascent on the dual with maximal-violating-pair
    selection. The offset b stays out of the iteration entirely (pair updates
    only use error differences, where it cancels) and is fixed at the midpoint
    of its admissible interval on exit."""

    def __init__(self, K, y, C, tol):
        self.K = K
        self.y = y.astype(float)
        self.C = C
        self.tol = tol
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.g = np.zeros(self.n)  # g_i = sum_j alpha_j y_j K_ij, offset-free

    def decision_values(self) -> np.ndarray:
        return self.g + self.b

    def _bound_sets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """F = y - g plus the sets demanding b >= F (lower) and b <= F (upper)."""
        F = self.y - self.g
        interior = (self.alpha > 0) & (self.alpha < self.C)
        pos = self.y > 0
        at_zero = self.alpha <= 0
        at_c = self.alpha >= self.C
        lower = interior | (at_zero & pos) | (at_c & ~pos)
        upper = interior | (at_zero & ~pos) | (at_c & pos)
        return F, lower, upper

    def take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        C1, C2 = self.C[i1], self.C[i2]
        E1 = self.g[i1] - y1
        E2 = self.g[i2] - y2
        s = y1 * y2
        if s < 0:
            L = max(0.0, a2 - a1)
            H = min(C2, C1 + a2 - a1)
        else:
            L = max(0.0, a1 + a2 - C1)
            H = min(C2, a1 + a2)
        if L >= H:
            return False
        k11 = self.K[i1, i1]
        k12 = self.K[i1, i2]
        k22 = self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (E1 - E2) / eta
            a2_new = min(max(a2_new, L), H)
        else:
            # objective is linear along the pair: evaluate the dual at both ends
            v1 = self.g[i1] - a1 * y1 * k11 - a2 * y2 * k12
            v2 = self.g[i2] - a1 * y1 * k12 - a2 * y2 * k22

            def dual(a2_trial: float) -> float:
                a1_trial = a1 + s * (a2 - a2_trial)
                return (
                    a1_trial + a2_trial
                    - 0.5 * a1_trial ** 2 * k11
                    - 0.5 * a2_trial ** 2 * k22
                    - s * a1_trial * a2_trial * k12
                    - y1 * a1_trial * v1
                    - y2 * a2_trial * v2
                )

            dl, dh = dual(L), dual(H)
            if dl > dh + 1e-12:
                a2_new = L
            elif dh > dl + 1e-12:
                a2_new = H
            else:
                return False
        if abs(a2_new - a2) < 1e-14 * (a2_new + a2 + 1e-14):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 0:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > C1:
            a2_new += s * (a1_new - C1)
            a1_new = C1

        # snap float residue onto the exact bounds so bound points never
        # masquerade as interior support vectors
        def snap(a: float, c: float) -> float:
            eps = 1e-10 * max(c, 1.0)
            if a < eps:
                return 0.0
            if a > c - eps:
                return c
            return a

        a1_new = snap(a1_new, C1)
        a2_new = snap(a2_new, C2)
        if a1_new == a1 and a2_new == a2:
            return False

        d1 = (a1_new - a1) * y1
        d2 = (a2_new - a2) * y2
        self.g += d1 * self.K[i1] + d2 * self.K[i2]
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        return True

    def _finalize_b(self) -> None:
        F, lower, upper = self._bound_sets()
        b_lo = float(np.max(F[lower])) if lower.any() else None
        b_hi = float(np.min(F[upper])) if upper.any() else None
        if b_lo is not None and b_hi is not None:
            self.b = (b_lo + b_hi) / 2.0
        elif b_lo is not None:
            self.b = b_lo
        elif b_hi is not None:
            self.b = b_hi

    def solve(self, max_passes: int) -> bool:
        """Iterate until the largest lower demand on b exceeds the smallest
        upper demand by at most 2*tol; with b at the interval midpoint every
        constraint is then within tol."""
        budget = max_passes * max(self.n, 16)
        for _ in range(budget):
            F, lower, upper = self._bound_sets()
            low_idx = np.nonzero(lower)[0]
            up_idx = np.nonzero(upper)[0]
            if len(low_idx) == 0 or len(up_idx) == 0:
                break
            i = int(low_idx[np.argmax(F[low_idx])])
            j = int(up_idx[np.argmin(F[up_idx])])
            if F[i] - F[j] <= 2.0 * self.tol:
                self._finalize_b()
                return True
            if not self.take_step(i, j):
                # numerically stuck on the worst pair: try nearby partners
                moved = False
                for jj in up_idx[np.argsort(F[up_idx])][:8]:
                    if self.take_step(i, int(jj)):
                        moved = True
                        break
                if not moved:
                    for ii in low_idx[np.argsort(-F[low_idx])][:8]:
                        if self.take_step(int(ii), j):
                            moved = True
                            break
                if not moved:
                    break
        self._finalize_b()
        return bool(
            np.all(kkt_violations(self.K, self.y, self.alpha, self.b, self.C) <= self.tol)
        )


def fit_platt_sigmoid(decision: np.ndarray, y01: np.ndarray,
                      max_iter: int = 100) -> tuple[float, float]:
    """Fit p = 1 / (1 + exp(A*f + B)) on training decision values."""
    prior1 = float(np.sum(y01 == 1))
    prior0 = float(np.sum(y01 == 0))
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y01 == 1, hi, lo)
    A, B = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))
    eps = 1e-12

    def objective(A_, B_):
        z = A_ * decision + B_
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * decision + B
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        d1 = t - p
        d2 = p * (1 - p)
        g1 = float(np.dot(decision, d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-10 and abs(g2) < 1e-10:
            break
        h11 = float(np.dot(decision * decision, d2)) + eps
        h22 = float(np.sum(d2)) + eps
        h21 = float(np.dot(decision, d2))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            A_new, B_new = A + step * dA, B + step * dB
            f_new = objective(A_new, B_new)
            if f_new < fval + 1e-4 * step * gd:
                A, B, fval = A_new, B_new, f_new
                break
            step /= 2.0
        else:
            break
    return A, B


@dataclass
class FittedSvm:
    support_x: np.ndarray
    support_ay: np.ndarray    # alpha_i * y_i for support vectors
    b: float
    gamma: float
    platt_a: float
    platt_b: float
    codec_state: dict
    converged: bool

    def decision(self, X: np.ndarray) -> np.ndarray:
        K = rbf_kernel(X, self.support_x, self.gamma)
        return K @ self.support_ay + self.b

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = self.platt_a * self.decision(X) + self.platt_b
        return np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))

    def to_dict(self) -> dict:
        return {
            "support_x": self.support_x.tolist(),
            "support_ay": self.support_ay.tolist(),
            "b": self.b,
            "gamma": self.gamma,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
            "codec_state": self.codec_state,
            "converged": self.converged,
        }

    @staticmethod
    def from_dict(doc: dict) -> "FittedSvm":
        return FittedSvm(
            support_x=np.asarray(doc["support_x"]),
            support_ay=np.asarray(doc["support_ay"]),
            b=doc["b"],
            gamma=doc["gamma"],
            platt_a=doc["platt_a"],
            platt_b=doc["platt_b"],
            codec_state=doc["codec_state"],
            converged=doc["converged"],
        )


def fit_svm(X: np.ndarray, y01: np.ndarray, w: np.ndarray, params: SvmParams,
            codec_state: dict, seed: int = 0) -> FittedSvm:
    """Solve the weighted dual and calibrate probabilities.

    The solver is deterministic; seed is accepted for interface symmetry with
    the other families and ignored.
    """
    y = np.where(y01 == 1, 1.0, -1.0)
    C = params.cost * np.asarray(w, dtype=float)
    K = rbf_kernel(X, X, params.gamma)
    smo = _Smo(K, y, C, params.smo_tolerance)
    converged = smo.solve(params.max_passes)
    decision = smo.decision_values()
    A, B = fit_platt_sigmoid(decision, y01)
    keep = smo.alpha > 0
    if not np.any(keep):
        keep = np.ones(len(y), dtype=bool)
    return FittedSvm(
        support_x=X[keep].copy(),
        support_ay=(smo.alpha * y)[keep],
        b=smo.b,
        gamma=params.gamma,
        platt_a=A,
        platt_b=B,
        codec_state=codec_state,
        converged=converged,
    )
