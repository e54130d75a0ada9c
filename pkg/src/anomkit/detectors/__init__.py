"""Base anomaly scorers.

Every detector fits on presumed-clean data and emits per-instance scores
where higher means more anomalous. See each module for the scoring rule.
"""

from .base import BaseDetector, Standardizer
from .iforest import IsolationForestDetector, average_path_length, score_from_mean_path
from .lof import LOFDetector
from .mcd import EllipticEnvelopeDetector, MCDEstimate, fast_mcd, mahalanobis_score
from .ocsvm import OneClassSVMDetector
from .ridge import RidgeResidualDetector

DETECTOR_KINDS = {
    cls.kind: cls
    for cls in (
        LOFDetector,
        IsolationForestDetector,
        EllipticEnvelopeDetector,
        OneClassSVMDetector,
        RidgeResidualDetector,
    )
}


def make_detector(kind: str, **params) -> BaseDetector:
    """Instantiate a detector by kind name with keyword parameters."""
    try:
        cls = DETECTOR_KINDS[kind]
    except KeyError:
        raise KeyError(
            f"unknown detector kind {kind!r}; known: {sorted(DETECTOR_KINDS)}"
        ) from None
    return cls(**params)


__all__ = [
    "BaseDetector",
    "Standardizer",
    "DETECTOR_KINDS",
    "make_detector",
    "LOFDetector",
    "IsolationForestDetector",
    "EllipticEnvelopeDetector",
    "OneClassSVMDetector",
    "RidgeResidualDetector",
    "MCDEstimate",
    "fast_mcd",
    "mahalanobis_score",
    "average_path_length",
    "score_from_mean_path",
]
