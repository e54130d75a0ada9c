"""Isolation Forest.

Random axis-parallel partition trees: each split picks a feature at random
and a cut uniformly inside that feature's (min, max) over the node's sample,
so anomalies isolate in few steps. Scores use the standard normalization
2^(-E[path]/c(m)) so 0.5 marks average-depth points regardless of the
subsample size m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from .base import BaseDetector


def harmonic(n: int) -> float:
    """H(n) = sum_{i=1..n} 1/i, evaluated directly."""
    if n < 1:
        return 0.0
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def average_path_length(m: int) -> float:
    """Expected unsuccessful-search path length c(m) of a BST over m points."""
    if m <= 1:
        return 0.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


def _path_length_table(m: int) -> np.ndarray:
    """average_path_length(s) for s in 0..m, via one cumulative sum."""
    H = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, m + 1.0))])
    c = np.zeros(m + 1)
    s = np.arange(2, m + 1)
    c[2:] = 2.0 * H[s - 1] - 2.0 * (s - 1) / s
    return c


def score_from_mean_path(mean_path, m: int) -> np.ndarray:
    """Map mean isolation depth to the (0, 1) anomaly score."""
    return np.asarray(2.0 ** (-np.asarray(mean_path, dtype=float) / average_path_length(m)))


@dataclass
class TreeNode:
    """One node of an isolation tree: internal nodes carry a split, leaves a
    sample size used for the truncated-path adjustment."""

    size: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _grow(X: np.ndarray, rows: np.ndarray, height: int, limit: int,
          rng: np.random.Generator) -> TreeNode:
    n = len(rows)
    if n <= 1 or height >= limit:
        return TreeNode(size=n)
    sub = X[rows]
    lo = sub.min(axis=0)
    hi = sub.max(axis=0)
    splittable = np.where(np.nextafter(lo, hi) < hi)[0]
    if len(splittable) == 0:
        return TreeNode(size=n)
    feature = int(rng.choice(splittable))
    f_lo, f_hi = lo[feature], hi[feature]
    threshold = float(rng.uniform(f_lo, f_hi))
    if threshold <= f_lo:
        threshold = float(np.nextafter(f_lo, f_hi))
    go_left = sub[:, feature] < threshold
    return TreeNode(
        size=n,
        feature=feature,
        threshold=threshold,
        left=_grow(X, rows[go_left], height + 1, limit, rng),
        right=_grow(X, rows[~go_left], height + 1, limit, rng),
    )


def _tree_depths(node: TreeNode, X: np.ndarray, c_table: np.ndarray) -> np.ndarray:
    """Isolation depth of every row of X under one tree (truncated leaves add
    c(leaf size))."""
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]), 0)]
    while stack:
        nd, rows, depth = stack.pop()
        if nd.is_leaf:
            out[rows] = depth + c_table[nd.size]
            continue
        go_left = X[rows, nd.feature] < nd.threshold
        stack.append((nd.left, rows[go_left], depth + 1))
        stack.append((nd.right, rows[~go_left], depth + 1))
    return out


class IsolationForestDetector(BaseDetector):
    kind = "iforest"

    def __init__(self, n_trees: int = 100, subsample: int = 256, seed: int = 0):
        super().__init__()
        if n_trees < 1:
            raise FitError("iforest: n_trees must be >= 1")
        if subsample < 2:
            raise FitError("iforest: subsample must be >= 2")
        self.n_trees = int(n_trees)
        self.subsample = int(subsample)
        self.seed = int(seed)
        self.trees_: list[TreeNode] | None = None
        self.m_: int | None = None

    def _fit(self, A: np.ndarray, y=None) -> None:
        n = A.shape[0]
        if n < 2:
            raise FitError("iforest: need at least 2 rows")
        self.m_ = min(self.subsample, n)
        limit = int(np.ceil(np.log2(self.m_)))
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, t)))
            rows = rng.choice(n, size=self.m_, replace=False)
            self.trees_.append(_grow(A, rows, 0, limit, rng))

    def _score(self, Q: np.ndarray, y=None) -> np.ndarray:
        c_table = _path_length_table(self.m_)
        depths = np.zeros(Q.shape[0])
        for tree in self.trees_:
            depths += _tree_depths(tree, Q, c_table)
        return score_from_mean_path(depths / len(self.trees_), self.m_)
