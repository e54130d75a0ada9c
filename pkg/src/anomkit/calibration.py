"""Threshold selection on contaminated data and vicinity-tolerant scoring.

The quality metric credits a detection that lands within a fixed tick
radius of a labeled outlier: recall counts labeled outliers with at least
one prediction nearby, precision counts predictions with at least one
labeled outlier nearby. Vicinity windows never cross segment boundaries.

Threshold candidates are the midpoints between consecutive sorted unique
scores plus the sentinels 0 and 1. The metric-versus-threshold function is
piecewise constant between scores, so this sweep is exhaustive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabelVector
from .errors import SchemaError

POINTWISE = "pointwise"
NEIGHBORHOOD = "neighborhood"


def _as_marks(labels) -> np.ndarray:
    marks = labels.marks if isinstance(labels, LabelVector) else np.asarray(labels)
    if not np.isin(marks, (0, 1)).all():
        raise SchemaError("labels must be 0/1")
    return marks.astype(bool)


def _segment_slices(n: int, segment_ids) -> list[slice]:
    # segment ids must form contiguous blocks (rows are stacked per segment)
    if segment_ids is None:
        return [slice(0, n)]
    seg = np.asarray(segment_ids)
    if len(seg) != n:
        raise SchemaError("segment_ids length does not match labels")
    bounds = np.where(seg[1:] != seg[:-1])[0] + 1
    edges = np.concatenate([[0], bounds, [n]])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def vicinity_any(mask: np.ndarray, radius: int, segment_ids=None) -> np.ndarray:
    """True wherever the window [i - radius, i + radius], truncated at
    segment edges, contains a set entry of mask."""
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    out = np.zeros_like(mask)
    for sl in _segment_slices(len(mask), segment_ids):
        cum = np.concatenate([[0], np.cumsum(mask[sl].astype(np.int64))])
        m = sl.stop - sl.start
        idx = np.arange(m)
        lo = np.maximum(idx - radius, 0)
        hi = np.minimum(idx + radius + 1, m)
        out[sl] = (cum[hi] - cum[lo]) > 0
    return out


def _window_max(values: np.ndarray, radius: int, segment_ids=None) -> np.ndarray:
    """Per-position maximum of values over [i - radius, i + radius] within
    the position's segment."""
    out = values.astype(np.float64).copy()
    if radius == 0:
        return out
    for sl in _segment_slices(len(values), segment_ids):
        block = values[sl]
        acc = block.copy()
        for shift in range(1, radius + 1):
            acc[shift:] = np.maximum(acc[shift:], block[:-shift])
            acc[:-shift] = np.maximum(acc[:-shift], block[shift:])
        out[sl] = acc
    return out


@dataclass
class MetricReport:
    precision: float
    recall: float
    f1: float
    matched_truth: int
    matched_predictions: int
    truth_total: int
    predicted_total: int
    vicinity_radius: int
    degenerate: bool = False
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matched_truth": self.matched_truth,
            "matched_predictions": self.matched_predictions,
            "truth_total": self.truth_total,
            "predicted_total": self.predicted_total,
            "vicinity_radius": self.vicinity_radius,
            "degenerate": self.degenerate,
            **({"provenance": self.provenance} if self.provenance else {}),
        }


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def neighborhood_metric(pred, truth, radius: int, segment_ids=None) -> MetricReport:
    """Vicinity-tolerant precision/recall/F1 of predicted marks against
    ground-truth marks; radius 0 collapses to pointwise scoring."""
    p = _as_marks(pred)
    t = _as_marks(truth)
    if p.shape != t.shape:
        raise SchemaError(
            f"prediction length {p.shape} does not match truth {t.shape}"
        )
    pred_near = vicinity_any(p, radius, segment_ids)
    truth_near = vicinity_any(t, radius, segment_ids)
    truth_total = int(t.sum())
    predicted_total = int(p.sum())
    matched_truth = int((t & pred_near).sum())
    matched_pred = int((p & truth_near).sum())
    degenerate = truth_total == 0 or predicted_total == 0
    recall = matched_truth / truth_total if truth_total else 0.0
    precision = matched_pred / predicted_total if predicted_total else 0.0
    return MetricReport(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        matched_truth=matched_truth,
        matched_predictions=matched_pred,
        truth_total=truth_total,
        predicted_total=predicted_total,
        vicinity_radius=radius,
        degenerate=degenerate,
    )


def apply_threshold(scores, threshold: float) -> np.ndarray:
    """Binary marks: 1 wherever score >= threshold."""
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.uint8)


def threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive sorted unique scores, plus 0 and 1."""
    uniq = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (uniq[:-1] + uniq[1:]) / 2.0 if len(uniq) > 1 else np.empty(0)
    return np.unique(np.concatenate([[0.0], mids, [1.0]]))


@dataclass
class ThresholdResult:
    threshold: float
    achieved: float
    curve: np.ndarray  # columns: threshold, precision, recall, f1

    def curve_rows(self):
        return [tuple(row) for row in self.curve]


def select_threshold(scores, labels, radius: int = 0,
                     metric: str = NEIGHBORHOOD,
                     segment_ids=None) -> ThresholdResult:
    """Sweep all threshold candidates and return the F1-argmax (ties toward
    the smallest threshold).

    scores must lie in [0, 1] (normalized combined scores); labels need both
    classes. The sweep is evaluated in closed form: a labeled outlier is
    recalled at threshold T iff the maximum score in its vicinity window
    reaches T, and a prediction is precise iff its window holds a labeled
    outlier, which does not depend on T.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise SchemaError("scores must be one-dimensional")
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise SchemaError("scores must lie in [0, 1]; normalize them first")
    t = _as_marks(labels)
    if t.shape != s.shape:
        raise SchemaError("labels do not align with scores")
    if t.all() or not t.any():
        raise SchemaError("threshold selection needs both classes in the labels")
    if metric == POINTWISE:
        radius = 0
    elif metric != NEIGHBORHOOD:
        raise SchemaError(f"unknown metric {metric!r}")

    cands = threshold_candidates(s)
    sorted_scores = np.sort(s)
    n = len(s)
    truth_total = int(t.sum())

    # Recall numerator: count of truth positives whose window max >= T.
    window_max = _window_max(s, radius, segment_ids)[t]
    window_max_sorted = np.sort(window_max)
    recall_num = truth_total - np.searchsorted(window_max_sorted, cands, side="left")

    # Precision numerator: predictions at matched positions (fixed set).
    truth_near = vicinity_any(t, radius, segment_ids)
    matched_scores = np.sort(s[truth_near])
    prec_num = len(matched_scores) - np.searchsorted(matched_scores, cands, side="left")
    pred_count = n - np.searchsorted(sorted_scores, cands, side="left")

    recall = recall_num / truth_total
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_count > 0, prec_num / np.maximum(pred_count, 1), 0.0)
    denom = precision + recall
    f1 = np.where(denom > 0, 2.0 * precision * recall / np.maximum(denom, 1e-300), 0.0)

    best = int(np.argmax(f1))  # first max = smallest threshold on ties
    curve = np.column_stack([cands, precision, recall, f1])
    return ThresholdResult(
        threshold=float(cands[best]),
        achieved=float(f1[best]),
        curve=curve,
    )


def evaluate_pipeline(ensemble, combiner, threshold: float, X, truth,
                      radius: int = 0, y_target=None, segment_ids=None,
                      provenance: dict | None = None) -> MetricReport:
    """Score a calibrated ensemble on labeled data and report the vicinity
    metric at the stored threshold."""
    from .ensemble import combine  # local import to avoid a cycle

    S = ensemble.member_scores(X, y_target)
    final = combine(S, combiner)
    pred = apply_threshold(final, threshold)
    report = neighborhood_metric(pred, truth, radius, segment_ids=segment_ids)
    if provenance:
        report.provenance = dict(provenance)
    return report
