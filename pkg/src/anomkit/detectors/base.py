"""Shared detector machinery.

All detectors obey one contract: fit on presumed-clean data, then emit one
real score per scored instance with higher meaning more anomalous. Inputs
are standardized per column with constants learned at fit time and reapplied
at score time, and fitted models are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError, SchemaError


def as_matrix(X) -> np.ndarray:
    """Accept a FeatureMatrix or raw 2-D array; return float64 ndarray."""
    values = getattr(X, "values", X)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise SchemaError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float))


class BaseDetector:
    """Common fit/score plumbing; subclasses set ``kind`` and implement
    ``_fit`` / ``_score`` on standardized arrays."""

    kind: str = "base"

    def __init__(self):
        self.scaler_: Standardizer | None = None
        self.n_: int | None = None
        self.d_: int | None = None

    @property
    def is_fitted(self) -> bool:
        return self.scaler_ is not None

    def fit(self, X, y=None):
        A = as_matrix(X)
        if A.shape[0] < 1:
            raise FitError(f"{self.kind}: cannot fit on zero rows")
        self.n_, self.d_ = A.shape
        self.scaler_ = Standardizer.fit(A)
        self._fit(self.scaler_.transform(A), y)
        return self

    def score(self, X, y=None) -> np.ndarray:
        if not self.is_fitted:
            raise FitError(f"{self.kind}: score called before fit")
        Q = as_matrix(X)
        if Q.shape[1] != self.d_:
            raise SchemaError(
                f"{self.kind}: query has {Q.shape[1]} columns, model expects {self.d_}"
            )
        if Q.shape[0] == 0:
            return np.empty(0)
        return self._score(self.scaler_.transform(Q), y)

    def _fit(self, A: np.ndarray, y) -> None:
        raise NotImplementedError

    def _score(self, Q: np.ndarray, y) -> np.ndarray:
        raise NotImplementedError


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of A and rows of B."""
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def _knn_block(sq: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries per row of sq, ties broken by lowest
    column index, each row sorted by (value, index)."""
    n = sq.shape[1]
    if k >= n:
        cand = np.broadcast_to(np.arange(n), sq.shape)
        vals = sq
    else:
        cand = np.argpartition(sq, k - 1, axis=1)[:, :k]
        vals = np.take_along_axis(sq, cand, axis=1)
        kth = vals.max(axis=1)
        # argpartition may split ties at the k-th distance arbitrarily; redo
        # the affected rows with the lowest-index rule.
        ties_total = (sq <= kth[:, None]).sum(axis=1)
        for r in np.where(ties_total > k)[0]:
            at_kth = np.where(sq[r] == kth[r])[0]
            below = np.where(sq[r] < kth[r])[0]
            cand[r] = np.concatenate([below, at_kth])[:k]
            vals[r] = sq[r, cand[r]]
    order = np.lexsort((cand, vals), axis=1)[:, :k]
    return np.take_along_axis(cand, order, axis=1)


def chunked_neighbor_search(Q, X, k, chunk_rows=None):
    """k nearest rows of X for every row of Q, exact Euclidean metric, ties
    broken by lowest row index. Returns (distances, indices), each (len(Q), k)."""
    n = X.shape[0]
    if chunk_rows is None:
        chunk_rows = max(1, int(16_000_000 // max(n, 1)))
    dists = np.empty((Q.shape[0], k))
    idx = np.empty((Q.shape[0], k), dtype=np.int64)
    for start in range(0, Q.shape[0], chunk_rows):
        block = slice(start, min(start + chunk_rows, Q.shape[0]))
        sq = pairwise_sq_dists(Q[block], X)
        nearest = _knn_block(sq, k)
        idx[block] = nearest
        dists[block] = np.sqrt(np.take_along_axis(sq, nearest, axis=1))
    return dists, idx
