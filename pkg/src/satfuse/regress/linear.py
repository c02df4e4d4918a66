"""Least-squares and ridge regression with an unpenalized intercept."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    lam: float

    def predict(self, X) -> np.ndarray:
        return X @ self.weights + self.intercept


def fit_linear(X, y, lam: float = 0.0) -> LinearModel:
    """Solve min_w ||y - Xw - b||^2 + lam * ||w||^2 on centered data.

    Centering makes the intercept unpenalized; the solve goes through an
    orthogonal factorization (lstsq), with the penalty applied by row
    augmentation so large lam stays well-conditioned.  With lam = 0 and a
    rank-deficient design the minimum-norm solution is returned with a
    warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite entries in training data")
    if lam < 0:
        raise ValueError("lam must be >= 0")

    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean

    if lam == 0.0:
        w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
        if rank < p:
            warnings.warn(
                f"design matrix rank {rank} < {p}; returning the minimum-norm solution",
                RuntimeWarning,
            )
    else:
        A = np.vstack([Xc, np.sqrt(lam) * np.eye(p)])
        rhs = np.concatenate([yc, np.zeros(p)])
        w, _, _, _ = np.linalg.lstsq(A, rhs, rcond=None)

    intercept = y_mean - float(w @ x_mean)
    return LinearModel(weights=w, intercept=intercept, lam=float(lam))
