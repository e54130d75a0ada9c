"""Local Outlier Factor.

Density-ratio scoring: a point whose local reachability density is low
relative to its k nearest neighbors' densities gets a score above 1.
Neighbor search is exact; densities are floored by a tiny constant so
duplicate-heavy data cannot divide by zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import FitError
from .base import BaseDetector, chunked_neighbor_search

DENSITY_FLOOR = 1e-10


class LOFDetector(BaseDetector):
    kind = "lof"

    def __init__(self, k: int = 20):
        super().__init__()
        if k < 1:
            raise FitError(f"lof: k must be >= 1 (got {k})")
        self.k = int(k)
        self.X_: np.ndarray | None = None
        self.kdist_: np.ndarray | None = None
        self.lrd_: np.ndarray | None = None

    def _fit(self, A: np.ndarray, y=None) -> None:
        n = A.shape[0]
        if self.k >= n:
            raise FitError(f"lof: k={self.k} must be smaller than n={n}")
        # Search k+1 within the fit set and drop self (always the nearest,
        # distance 0, lowest tie index is the point's own row).
        dists, idx = chunked_neighbor_search(A, A, self.k + 1)
        # Drop self from each row's neighbor list. With duplicates the self
        # row can sit anywhere among the zero-distance ties, or fall outside
        # the k+1 set entirely; handle those rows individually.
        keep_d = dists[:, 1:].copy()
        keep_i = idx[:, 1:].copy()
        odd = np.where(idx[:, 0] != np.arange(n))[0]
        for r in odd:
            pos = np.where(idx[r] == r)[0]
            mask = np.ones(self.k + 1, dtype=bool)
            mask[pos[0] if len(pos) else self.k] = False
            keep_d[r] = dists[r, mask]
            keep_i[r] = idx[r, mask]
        self.X_ = A
        self.kdist_ = keep_d[:, -1].copy()
        reach = np.maximum(self.kdist_[keep_i], keep_d)
        self.lrd_ = 1.0 / (reach.mean(axis=1) + DENSITY_FLOOR)

    def _score(self, Q: np.ndarray, y=None) -> np.ndarray:
        dists, idx = chunked_neighbor_search(Q, self.X_, self.k)
        reach = np.maximum(self.kdist_[idx], dists)
        lrd_q = 1.0 / (reach.mean(axis=1) + DENSITY_FLOOR)
        return self.lrd_[idx].mean(axis=1) / lrd_q
