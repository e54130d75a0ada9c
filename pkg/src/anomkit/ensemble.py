"""Detector ensembles and score combination.

Two constructions: model averaging (one member per detector kind, full
feature set) and feature bagging (many members of one kind, each on a random
feature subset). Member scores are mapped to [0, 1] with min/max constants
taken from the first scoring pass over the threshold-selection split and
frozen for test time. Three consensus functions: plain mean (LT),
Pearson-weighted mean (WLT), and logistic regression over member scores
(LogReg).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabelVector
from .detectors import make_detector
from .detectors.base import as_matrix
from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceError,
    FitError,
    SchemaError,
)

COMBINER_KINDS = ("LT", "WLT", "LogReg")


def normalize_scores(s, lo: float, hi: float) -> np.ndarray:
    """Map scores through the affine [lo, hi] -> [0, 1] with clipping.

    A degenerate range (hi == lo) maps everything to 0.5.
    """
    if hi < lo:
        raise SchemaError(f"normalize_scores: hi={hi} < lo={lo}")
    s = np.asarray(s, dtype=np.float64)
    if hi == lo:
        return np.full(s.shape, 0.5)
    return np.clip((s - lo) / (hi - lo), 0.0, 1.0)


@dataclass
class FeatureBagConfig:
    base_kind: str
    n_models: int
    k_min: int | None = None  # default floor(d/2)
    k_max: int | None = None  # default d - 1
    seed: int = 0

    def __post_init__(self):
        if self.n_models < 1:
            raise ConfigError("feature bagging needs n_models >= 1")

    def bounds(self, d: int) -> tuple[int, int]:
        k_min = self.k_min if self.k_min is not None else max(d // 2, 1)
        k_max = self.k_max if self.k_max is not None else max(d - 1, 1)
        if not 1 <= k_min <= k_max <= d:
            raise ConfigError(
                f"infeasible feature-count bounds [{k_min}, {k_max}] for d={d}"
            )
        return k_min, k_max


@dataclass
class Member:
    detector: object
    feature_idx: np.ndarray
    target_col: int | None = None  # tabular ridge members read y from this column
    norm_lo: float | None = None
    norm_hi: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.norm_lo is not None and self.norm_lo == self.norm_hi


def _member_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def _fit_one(kind, X, cols, target, params, seed):
    """Fit one member of the given kind on the selected columns."""
    kw = dict(params.get(kind, {}))
    if kind in ("iforest", "elliptic"):
        kw.setdefault("seed", seed)
    det = make_detector(kind, **kw)
    sub = X[:, cols]
    if kind == "ridge":
        if target is None:
            raise ConfigError("ridge members need a regression target")
        y = X[:, target] if isinstance(target, (int, np.integer)) else np.asarray(target)
        det.fit(sub, y)
    else:
        det.fit(sub)
    return det


class EnsembleModel:
    """Fitted members plus frozen normalization state.

    ``calibrate_scores`` must run once, on the threshold-selection split,
    before ``member_scores`` can serve other data.
    """

    def __init__(self, members: list[Member], kind: str, d: int,
                 target_col: int | None = None, seed: int = 0):
        self.members = members
        self.kind = kind
        self.d = d
        self.target_col = target_col
        self.seed = seed

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def is_calibrated(self) -> bool:
        return all(m.norm_lo is not None for m in self.members)

    def _raw_member_scores(self, X, y=None) -> np.ndarray:
        A = as_matrix(X)
        if A.shape[1] != self.d:
            raise SchemaError(
                f"ensemble expects {self.d} columns, got {A.shape[1]}"
            )
        out = np.empty((A.shape[0], self.n_members))
        for m, member in enumerate(self.members):
            det = member.detector
            sub = A[:, member.feature_idx]
            if det.kind == "ridge":
                if member.target_col is not None:
                    y_m = A[:, member.target_col]
                elif y is not None:
                    y_m = np.asarray(y, dtype=np.float64)
                else:
                    raise SchemaError(
                        "ridge member needs target values at score time"
                    )
                out[:, m] = det.score(sub, y_m)
            else:
                out[:, m] = det.score(sub)
        return out

    def calibrate_scores(self, X, y=None) -> np.ndarray:
        """Score the threshold split, fixing each member's [0,1] mapping from
        the observed min/max. Runs once; the constants are frozen after."""
        if self.is_calibrated:
            raise CalibrationError(
                "normalization constants are already frozen; "
                "use member_scores for further data"
            )
        raw = self._raw_member_scores(X, y)
        if raw.shape[0] == 0:
            raise CalibrationError("cannot calibrate on an empty split")
        out = np.empty_like(raw)
        for m, member in enumerate(self.members):
            member.norm_lo = float(raw[:, m].min())
            member.norm_hi = float(raw[:, m].max())
            out[:, m] = normalize_scores(raw[:, m], member.norm_lo, member.norm_hi)
        return out

    def member_scores(self, X, y=None) -> np.ndarray:
        """Normalized member scores using the frozen constants."""
        if not self.is_calibrated:
            raise CalibrationError(
                "ensemble is not calibrated: run calibrate_scores on the "
                "threshold-selection split before scoring other data"
            )
        raw = self._raw_member_scores(X, y)
        out = np.empty_like(raw)
        for m, member in enumerate(self.members):
            out[:, m] = normalize_scores(raw[:, m], member.norm_lo, member.norm_hi)
        return out


def feature_bag_fit(X, cfg: FeatureBagConfig, target=None,
                    detector_params: dict | None = None) -> EnsembleModel:
    """Fit a feature-bagging ensemble: each member draws a feature-count k
    uniformly in the configured bounds and a k-subset without replacement.

    ``target`` is an external target vector, or a column index whose column
    is reserved as the regression target (excluded from the subset pool), or
    None for detectors that need no target.
    """
    A = as_matrix(X)
    d = A.shape[1]
    params = detector_params or {}
    target_col = target if isinstance(target, (int, np.integer)) else None
    pool = np.arange(d)
    if target_col is not None:
        if not 0 <= target_col < d:
            raise ConfigError(f"target column {target_col} outside [0, {d})")
        pool = pool[pool != target_col]
    k_min, k_max = cfg.bounds(len(pool))
    members = []
    for m in range(cfg.n_models):
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, m)))
        k = int(rng.integers(k_min, k_max + 1))
        cols = np.sort(rng.choice(pool, size=k, replace=False))
        det = _fit_one(
            cfg.base_kind, A, cols, target, params, _member_seed(cfg.seed, m)
        )
        members.append(Member(det, cols, target_col=target_col))
    return EnsembleModel(members, "feature_bag", d, target_col, cfg.seed)


def model_average_fit(X, kinds: list[str], target=None,
                      detector_params: dict | None = None,
                      seed: int = 0) -> EnsembleModel:
    """Fit one member per detector kind on the full feature set. A ridge
    member regresses the designated target on the remaining columns."""
    if not kinds:
        raise ConfigError("model averaging needs at least one detector kind")
    A = as_matrix(X)
    d = A.shape[1]
    params = detector_params or {}
    target_col = target if isinstance(target, (int, np.integer)) else None
    members = []
    for m, kind in enumerate(kinds):
        cols = np.arange(d)
        if kind == "ridge" and target_col is not None:
            cols = cols[cols != target_col]
        try:
            det = _fit_one(kind, A, cols, target, params, _member_seed(seed, m))
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"model averaging: member {kind!r} failed: {exc}", best=exc.best
            ) from exc
        except Exception as exc:
            raise FitError(f"model averaging: member {kind!r} failed: {exc}") from exc
        members.append(
            Member(det, cols, target_col=target_col if kind == "ridge" else None)
        )
    return EnsembleModel(members, "model_average", d, target_col, seed)


# ---------------------------------------------------------------------------
# Consensus functions
# ---------------------------------------------------------------------------

def pearson(a, b) -> float:
    """Sample Pearson correlation; raises on constant input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise SchemaError("pearson needs two equal-length sequences (n >= 2)")
    da = a - a.mean()
    db = b - b.mean()
    va = (da * da).sum()
    vb = (db * db).sum()
    if va == 0 or vb == 0:
        raise SchemaError("pearson is undefined for constant input")
    return float((da * db).sum() / np.sqrt(va * vb))


@dataclass
class CombinerSpec:
    kind: str
    weights: np.ndarray | None = None
    bias: float | None = None

    def __post_init__(self):
        if self.kind not in COMBINER_KINDS:
            raise ConfigError(f"unknown combiner kind {self.kind!r}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if not np.all(np.isfinite(self.weights)):
                raise ConfigError("combiner weights must be finite")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss(wb: np.ndarray, S: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Mean cross-entropy plus (lam/2)||w||^2; bias (last entry) unpenalized."""
    w, b = wb[:-1], wb[-1]
    z = S @ w + b
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, stably:
    margins = np.where(y == 1, z, -z)
    ce = np.logaddexp(0.0, -margins).mean()
    return float(ce + 0.5 * lam * (w @ w))


def logreg_gradient(wb: np.ndarray, S: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    w, b = wb[:-1], wb[-1]
    p = _sigmoid(S @ w + b)
    r = (p - y) / len(y)
    return np.concatenate([S.T @ r + lam * w, [r.sum()]])


def logreg_fit(S: np.ndarray, y: np.ndarray, lam: float = 1e-4,
               grad_tol: float = 1e-8, max_iter: int = 200):
    """L2-regularized logistic regression by damped Newton (IRLS) iterations,
    run to gradient norm <= grad_tol. Returns (weights, bias)."""
    n, M = S.shape
    wb = np.zeros(M + 1)
    loss = logreg_loss(wb, S, y, lam)
    for _ in range(max_iter):
        grad = logreg_gradient(wb, S, y, lam)
        if np.linalg.norm(grad) <= grad_tol:
            return wb[:-1].copy(), float(wb[-1])
        p = _sigmoid(S @ wb[:-1] + wb[-1])
        r = np.maximum(p * (1.0 - p), 1e-12) / n
        Sb = np.hstack([S, np.ones((n, 1))])
        H = Sb.T @ (Sb * r[:, None])
        H[:-1, :-1] += lam * np.eye(M)
        H += 1e-12 * np.eye(M + 1)
        step = np.linalg.solve(H, grad)
        scale = 1.0
        for _ in range(60):
            cand = wb - scale * step
            cand_loss = logreg_loss(cand, S, y, lam)
            if cand_loss <= loss:
                wb, loss = cand, cand_loss
                break
            scale *= 0.5
        else:
            break
    grad = logreg_gradient(wb, S, y, lam)
    if np.linalg.norm(grad) > grad_tol:
        raise ConvergenceError(
            f"logreg: gradient norm {np.linalg.norm(grad):.3e} above tolerance "
            f"{grad_tol:g} after {max_iter} iterations",
            best=(wb[:-1].copy(), float(wb[-1])),
        )
    return wb[:-1].copy(), float(wb[-1])


def fit_combiner(S, y, kind: str, lam: float = 1e-4) -> CombinerSpec:
    """Fit a consensus function on member scores S against binary labels y.

    WLT weights are the per-member Pearson correlations with the labels,
    clipped at zero and renormalized to sum 1 (uniform fallback when every
    correlation is non-positive or undefined). LogReg fits an L2-regularized
    logistic regression.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2:
        raise SchemaError("member-score matrix must be 2-D")
    if kind == "LT":
        return CombinerSpec("LT")
    marks = y.marks if isinstance(y, LabelVector) else np.asarray(y)
    if marks.shape[0] != S.shape[0]:
        raise SchemaError("labels do not align with member scores")
    if len(np.unique(marks)) < 2:
        raise SchemaError(f"{kind} combiner needs both classes in the labels")
    if kind == "WLT":
        weights = np.zeros(S.shape[1])
        for m in range(S.shape[1]):
            try:
                weights[m] = max(0.0, pearson(S[:, m], marks))
            except SchemaError:
                weights[m] = 0.0
        total = weights.sum()
        if total == 0:
            weights = np.full(S.shape[1], 1.0 / S.shape[1])
        else:
            weights = weights / total
        return CombinerSpec("WLT", weights=weights)
    if kind == "LogReg":
        w, b = logreg_fit(S, marks.astype(np.float64), lam=lam)
        return CombinerSpec("LogReg", weights=w, bias=b)
    raise ConfigError(f"unknown combiner kind {kind!r}")


def combine(S, spec: CombinerSpec) -> np.ndarray:
    """Collapse an n x M member-score matrix to one score per row, in [0, 1]."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2:
        raise SchemaError("member-score matrix must be 2-D")
    if spec.kind == "LT":
        # same kernel as WLT with uniform weights, so the two agree exactly
        return np.clip(S @ np.full(S.shape[1], 1.0 / S.shape[1]), 0.0, 1.0)
    if spec.weights is None or len(spec.weights) != S.shape[1]:
        raise SchemaError(
            f"combiner expects {None if spec.weights is None else len(spec.weights)} "
            f"members, matrix has {S.shape[1]}"
        )
    if spec.kind == "WLT":
        # weights sum to 1 and member scores sit in [0, 1]; the clip only
        # absorbs last-bit rounding from the dot product
        return np.clip(S @ spec.weights, 0.0, 1.0)
    if spec.kind == "LogReg":
        return _sigmoid(S @ spec.weights + spec.bias)
    raise ConfigError(f"unknown combiner kind {spec.kind!r}")
