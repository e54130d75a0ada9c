"""Independent reference implementations used to check the fast paths.

Everything here is deliberately written as plain loops and direct formulas,
sharing no code with the library implementations it validates.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

LOF_FLOOR = 1e-10


def standardize(X):
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std, mean, std


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def _knn(point, X, k, exclude=None):
    """k nearest rows of X to point, ties broken by lowest row index."""
    pairs = [
        (_dist(point, X[j]), j)
        for j in range(len(X))
        if j != exclude
    ]
    pairs.sort()
    return pairs[:k]


def brute_lof(X_fit, Q, k):
    """Reference LOF: fit-set densities with self excluded, queries scored
    against the fit set as-is. Mirrors the documented definition including
    the density floor."""
    A, mean, std = standardize(X_fit)
    Qs = (np.asarray(Q, dtype=float) - mean) / std
    n = len(A)
    kdist = np.empty(n)
    neighbors = []
    for i in range(n):
        nn = _knn(A[i], A, k, exclude=i)
        kdist[i] = nn[-1][0]
        neighbors.append(nn)
    lrd = np.empty(n)
    for i in range(n):
        reach = [max(kdist[j], d) for d, j in neighbors[i]]
        lrd[i] = 1.0 / (sum(reach) / k + LOF_FLOOR)
    scores = np.empty(len(Qs))
    for qi, q in enumerate(Qs):
        nn = _knn(q, A, k)
        reach = [max(kdist[j], d) for d, j in nn]
        lrd_q = 1.0 / (sum(reach) / k + LOF_FLOOR)
        scores[qi] = sum(lrd[j] for _, j in nn) / k / lrd_q
    return scores


def vicinity_metric(pred, truth, radius, segment_ids=None):
    """Double-loop vicinity precision/recall/F1.

    Returns (precision, recall, f1, matched_truth, matched_pred)."""
    pred = list(map(int, pred))
    truth = list(map(int, truth))
    n = len(pred)
    seg = list(segment_ids) if segment_ids is not None else [0] * n

    def near(i, marks):
        for j in range(n):
            if abs(i - j) <= radius and seg[i] == seg[j] and marks[j]:
                return True
        return False

    truth_total = sum(truth)
    pred_total = sum(pred)
    matched_truth = sum(1 for i in range(n) if truth[i] and near(i, pred))
    matched_pred = sum(1 for j in range(n) if pred[j] and near(j, truth))
    recall = matched_truth / truth_total if truth_total else 0.0
    precision = matched_pred / pred_total if pred_total else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1, matched_truth, matched_pred


def best_cut_f1(scores, truth, radius, segment_ids=None):
    """Max vicinity F1 over every possible thresholding of the scores
    (enumerates all distinct prediction sets)."""
    scores = np.asarray(scores, dtype=float)
    cuts = sorted(set(scores.tolist()))
    thresholds = [0.0] + [
        (a + b) / 2 for a, b in zip(cuts[:-1], cuts[1:])
    ] + [1.0, math.nextafter(max(cuts), math.inf)]
    best = 0.0
    for t in thresholds:
        pred = [1 if s >= t else 0 for s in scores]
        f1 = vicinity_metric(pred, truth, radius, segment_ids)[2]
        best = max(best, f1)
    return best


def exhaustive_mcd(X, h):
    """Global MCD optimum by enumerating every h-subset (ML covariance)."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    best_det, best_subset = math.inf, None
    for subset in itertools.combinations(range(n), h):
        sub = X[list(subset)]
        mu = sub.mean(axis=0)
        diff = sub - mu
        cov = diff.T @ diff / h
        det = float(np.linalg.det(cov))
        if det < best_det:
            best_det, best_subset = det, subset
    return best_det, best_subset


def central_difference_gradient(fun, x, eps=1e-5):
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(len(x)):
        up = x.copy()
        dn = x.copy()
        up[i] += eps
        dn[i] -= eps
        grad[i] = (fun(up) - fun(dn)) / (2 * eps)
    return grad


def least_squares_with_intercept(X, y):
    """Normal-equations least squares with an intercept column."""
    X = np.asarray(X, dtype=float)
    A = np.hstack([X, np.ones((len(X), 1))])
    coef = np.linalg.solve(A.T @ A, A.T @ np.asarray(y, dtype=float))
    return A @ coef
