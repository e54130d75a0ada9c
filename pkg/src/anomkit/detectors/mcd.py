"""Robust location/scatter by minimum covariance determinant, with
Mahalanobis-distance scoring (elliptic envelope).

The estimator searches h-point subsets by concentration steps from many
starts: each step re-estimates mean and covariance from the current subset,
then keeps the h points with smallest Mahalanobis distance. The determinant
never increases along the way. One start always descends from the
full-sample estimate, which pins the returned determinant at or below the
full-sample covariance determinant. Covariances use the 1/h (maximum
likelihood) convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FitError, SchemaError
from .base import BaseDetector


@dataclass
class MCDEstimate:
    robust_mean: np.ndarray
    robust_covariance: np.ndarray  # regularized, positive definite
    support_mask: np.ndarray
    det_subset: float  # determinant of the raw h-subset ML covariance
    det_full: float  # determinant of the full-sample ML covariance
    h: int
    chol_: np.ndarray | None = field(default=None, repr=False, compare=False)

    def cholesky(self) -> np.ndarray:
        if self.chol_ is None:
            self.chol_ = np.linalg.cholesky(self.robust_covariance)
        return self.chol_


def _ml_mean_cov(X: np.ndarray):
    mu = X.mean(axis=0)
    C = X - mu
    return mu, (C.T @ C) / len(X)


def _sq_mahalanobis(X: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    eps = max(1e-9 * np.trace(cov) / d, 1e-12)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(cov + eps * np.eye(d))
    z = np.linalg.solve(L, (X - mu).T)
    return (z * z).sum(axis=0)


def default_support(n: int, d: int) -> int:
    return (n + d + 1) // 2


def _logdet(cov: np.ndarray) -> float:
    """log det of a covariance; -inf when it is numerically singular."""
    sign, value = np.linalg.slogdet(cov)
    return float(value) if sign > 0 else -np.inf


def _c_steps(X, support, h, max_steps=100):
    """Concentrate from an initial support until the subset stops changing.

    Determinants are tracked in log space so tiny but nonsingular scatters
    do not underflow to an apparent exact fit."""
    logdet = np.inf
    for _ in range(max_steps):
        mu, cov = _ml_mean_cov(X[support])
        new_logdet = _logdet(cov)
        dist = _sq_mahalanobis(X, mu, cov)
        new_support = np.sort(np.argsort(dist, kind="stable")[:h])
        if new_logdet >= logdet and np.array_equal(new_support, support):
            break
        logdet, support = new_logdet, new_support
        if logdet == -np.inf:
            break
    mu, cov = _ml_mean_cov(X[support])
    return support, mu, cov, _logdet(cov)


def fast_mcd(
    X,
    support_fraction: float | None = None,
    n_starts: int = 30,
    seed: int = 0,
) -> MCDEstimate:
    """Minimum covariance determinant estimate over h-point subsets.

    h defaults to floor((n + d + 1) / 2). Raises if the best subset's
    covariance stays rank-deficient even after the +eps*I regularization.
    """
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2:
        raise SchemaError("fast_mcd expects a 2-D matrix")
    n, d = X.shape
    if n <= d + 1:
        raise FitError(f"fast_mcd: need n > d + 1 (got n={n}, d={d})")
    if support_fraction is None:
        h = default_support(n, d)
    else:
        if not 0.0 < support_fraction <= 1.0:
            raise FitError("support_fraction must be in (0, 1]")
        h = int(round(support_fraction * n))
        h = min(max(h, d + 1), n)

    mu_full, cov_full = _ml_mean_cov(X)
    logdet_full = _logdet(cov_full)

    rng = np.random.default_rng(seed)
    best = None
    # Start 0: concentrate straight from the full-sample estimate. This
    # start alone guarantees det_subset <= det_full.
    dist = _sq_mahalanobis(X, mu_full, cov_full)
    starts = [np.sort(np.argsort(dist, kind="stable")[:h])]
    grow_cap = min(3 * (d + 1), n)
    for _ in range(n_starts):
        subset = rng.choice(n, size=min(d + 1, n), replace=False)
        # Grow degenerate elemental subsets until their covariance gains full
        # rank; bounded, since rank-deficient data never gets there.
        while len(subset) < grow_cap:
            _, cov = _ml_mean_cov(X[subset])
            if np.isfinite(_logdet(cov)):
                break
            extra = rng.choice(
                np.setdiff1d(np.arange(n), subset), size=min(d, n - len(subset)),
                replace=False,
            )
            subset = np.concatenate([subset, extra])
        mu, cov = _ml_mean_cov(X[subset])
        dist = _sq_mahalanobis(X, mu, cov)
        starts.append(np.sort(np.argsort(dist, kind="stable")[:h]))

    for support in starts:
        support, mu, cov, logdet = _c_steps(X, support, h)
        if best is None or logdet < best[3]:
            best = (support, mu, cov, logdet)

    support, mu, cov, logdet = best
    # On numerically singular full-sample covariances both determinants are 0
    # mathematically; rounding may leave either slogdet finite, so the bound
    # is only meaningful when the full estimate has full rank.
    assert logdet <= logdet_full + 1e-9 or not np.isfinite(logdet_full), (
        "MCD determinant exceeds full-sample determinant"
    )

    eps = 1e-9 * max(np.trace(cov), 0.0) / d
    cov_reg = cov + eps * np.eye(d)
    try:
        np.linalg.cholesky(cov_reg)
    except np.linalg.LinAlgError:
        raise FitError(
            "fast_mcd: best h-subset covariance is rank-deficient even after "
            "regularization; cannot score against it"
        ) from None
    mask = np.zeros(n, dtype=bool)
    mask[support] = True
    return MCDEstimate(
        robust_mean=mu,
        robust_covariance=cov_reg,
        support_mask=mask,
        det_subset=float(np.exp(logdet)),
        det_full=float(np.exp(logdet_full)),
        h=h,
    )


def mahalanobis_score(estimate: MCDEstimate, Q) -> np.ndarray:
    """sqrt((q - mu)' Sigma^-1 (q - mu)) under the robust estimate."""
    Q = np.asarray(getattr(Q, "values", Q), dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != len(estimate.robust_mean):
        raise SchemaError(
            f"query dimension {Q.shape} does not match estimate "
            f"d={len(estimate.robust_mean)}"
        )
    L = estimate.cholesky()
    z = np.linalg.solve(L, (Q - estimate.robust_mean).T)
    return np.sqrt((z * z).sum(axis=0))


class EllipticEnvelopeDetector(BaseDetector):
    kind = "elliptic"

    def __init__(
        self,
        support_fraction: float | None = None,
        n_starts: int = 30,
        seed: int = 0,
    ):
        super().__init__()
        self.support_fraction = support_fraction
        self.n_starts = int(n_starts)
        self.seed = int(seed)
        self.estimate_: MCDEstimate | None = None

    def _fit(self, A: np.ndarray, y=None) -> None:
        self.estimate_ = fast_mcd(
            A,
            support_fraction=self.support_fraction,
            n_starts=self.n_starts,
            seed=self.seed,
        )

    def _score(self, Q: np.ndarray, y=None) -> np.ndarray:
        return mahalanobis_score(self.estimate_, Q)
