"""One-class SVM, nu-formulation, RBF kernel.

Solves the dual

    min 1/2 a' Q a   s.t.  0 <= a_i <= 1/(nu*n),  sum(a) = 1

by sequential optimization of maximal-violating pairs, with an LRU cache of
kernel rows. The decision offset rho is recovered from the free support
vectors; scores are rho minus the kernel expansion so that larger means
more anomalous.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ConvergenceError, FitError
from .base import BaseDetector


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _RowCache:
    """LRU cache of kernel rows K(X[i], X)."""

    def __init__(self, X: np.ndarray, gamma: float, capacity: int = 512):
        self.X = X
        self.gamma = gamma
        self.capacity = capacity
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        row = rbf_kernel(self.X[i : i + 1], self.X, self.gamma)[0]
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


def _smo_one_class(X: np.ndarray, nu: float, gamma: float, tol: float,
                   max_iter: int):
    """Returns (alpha, rho, n_iter) or raises ConvergenceError carrying the
    best iterate reached."""
    n = X.shape[0]
    upper = 1.0 / (nu * n)
    alpha = np.zeros(n)
    n_full = int(np.floor(nu * n))
    alpha[:n_full] = upper
    if n_full < n:
        alpha[n_full] = 1.0 - n_full * upper

    cache = _RowCache(X, gamma)
    nz = np.where(alpha > 0)[0]
    g = np.empty(n)  # gradient of 1/2 a'Qa
    for start in range(0, n, 8192):
        block = slice(start, min(start + 8192, n))
        g[block] = rbf_kernel(X[block], X[nz], gamma) @ alpha[nz]

    def recover_rho() -> float:
        free = (alpha > 0) & (alpha < upper)
        if free.any():
            return float(g[free].mean())
        lo = g[alpha < upper].min() if (alpha < upper).any() else g.max()
        hi = g[alpha > 0].max() if (alpha > 0).any() else g.min()
        return float((lo + hi) / 2.0)

    it = 0
    while True:
        can_up = alpha < upper
        can_dn = alpha > 0
        if not can_up.any():
            break  # nu == 1: every coefficient is clamped, nothing can move
        i = int(np.where(can_up, g, np.inf).argmin())
        j = int(np.where(can_dn, g, -np.inf).argmax())
        if g[j] - g[i] < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"ocsvm: SMO not converged after {max_iter} iterations "
                f"(KKT gap {g[j] - g[i]:.3e} > tol {tol:g})",
                best=(alpha.copy(), recover_rho(), it),
            )
        qi = cache.row(i)
        qj = cache.row(j)
        quad = qi[i] + qj[j] - 2.0 * qi[j]
        step = (g[j] - g[i]) / max(quad, 1e-12)
        step = min(step, upper - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        g += step * (qi - qj)
        it += 1
    return alpha, recover_rho(), it


class OneClassSVMDetector(BaseDetector):
    kind = "ocsvm"

    def __init__(
        self,
        nu: float = 0.05,
        gamma: float | None = None,
        tol: float = 1e-4,
        max_iter: int = 1_000_000,
    ):
        super().__init__()
        if not 0.0 < nu <= 1.0:
            raise FitError(f"ocsvm: nu must be in (0, 1] (got {nu})")
        if gamma is not None and gamma <= 0:
            raise FitError("ocsvm: gamma must be positive")
        self.nu = float(nu)
        self.gamma = gamma
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.gamma_: float | None = None
        self.alpha_: np.ndarray | None = None
        self.rho_: float | None = None
        self.sv_X_: np.ndarray | None = None
        self.sv_alpha_: np.ndarray | None = None
        self.n_iter_: int | None = None

    def _fit(self, A: np.ndarray, y=None) -> None:
        n, d = A.shape
        if n < 2:
            raise FitError("ocsvm: need at least 2 rows")
        self.gamma_ = float(self.gamma) if self.gamma is not None else 1.0 / d
        try:
            alpha, rho, it = _smo_one_class(
                A, self.nu, self.gamma_, self.tol, self.max_iter
            )
        except ConvergenceError as exc:
            alpha, rho, it = exc.best
            self._store(A, alpha, rho, it)
            exc.best = self
            raise
        self._store(A, alpha, rho, it)

    def _store(self, A, alpha, rho, it):
        self.alpha_ = alpha
        self.rho_ = rho
        self.n_iter_ = it
        sv = alpha > 0
        self.sv_X_ = A[sv].copy()
        self.sv_alpha_ = alpha[sv].copy()

    def decision_function(self, X) -> np.ndarray:
        return -self.score(X)

    def _score(self, Q: np.ndarray, y=None) -> np.ndarray:
        K = rbf_kernel(Q, self.sv_X_, self.gamma_)
        return self.rho_ - K @ self.sv_alpha_
