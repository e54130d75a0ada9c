"""Forecast-residual detector backed by ridge regression.

Fits a linear predictor of a target quantity (typically the next tick of a
sensor channel, or a designated column of a tabular set) and scores each
instance by its absolute prediction residual.
"""

from __future__ import annotations

import numpy as np

from ..errors import FitError, SchemaError
from .base import BaseDetector


class RidgeResidualDetector(BaseDetector):
    kind = "ridge"

    def __init__(self, lam: float = 1.0):
        super().__init__()
        if lam < 0:
            raise FitError(f"ridge: lambda must be >= 0 (got {lam})")
        self.lam = float(lam)
        self.weights_: np.ndarray | None = None
        self.y_mean_: float | None = None

    def _fit(self, A: np.ndarray, y) -> None:
        if y is None:
            raise FitError("ridge: a target vector is required")
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (A.shape[0],):
            raise SchemaError(
                f"ridge: target length {y.shape} does not match {A.shape[0]} rows"
            )
        self.y_mean_ = float(y.mean())
        gram = A.T @ A + self.lam * np.eye(A.shape[1])
        rhs = A.T @ (y - self.y_mean_)
        if self.lam == 0.0:
            eigs = np.linalg.eigvalsh(gram)
            if eigs[0] <= eigs[-1] * 1e-10:
                raise FitError(
                    "ridge: normal equations are singular; set lambda > 0"
                )
        try:
            L = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise FitError(
                "ridge: normal equations are singular; set lambda > 0"
            ) from None
        self.weights_ = np.linalg.solve(L.T, np.linalg.solve(L, rhs))

    def predict(self, X) -> np.ndarray:
        if not self.is_fitted:
            raise FitError("ridge: predict called before fit")
        Q = self.scaler_.transform(
            np.asarray(getattr(X, "values", X), dtype=np.float64)
        )
        return Q @ self.weights_ + self.y_mean_

    def _score(self, Q: np.ndarray, y) -> np.ndarray:
        if y is None:
            raise SchemaError("ridge: scoring requires the aligned target values")
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (Q.shape[0],):
            raise SchemaError("ridge: target length does not match query rows")
        return np.abs(y - (Q @ self.weights_ + self.y_mean_))
