import numpy as np
import pytest

from anomkit.detectors import EllipticEnvelopeDetector, fast_mcd, mahalanobis_score
from anomkit.detectors.mcd import MCDEstimate, default_support
from anomkit.errors import FitError, SchemaError

from _oracles import exhaustive_mcd


def test_matches_exhaustive_search_on_micro_instances():
    for trial in range(8):
        rng = np.random.default_rng(300 + trial)
        n = int(rng.integers(8, 16))
        d = 2
        X = rng.normal(size=(n, d))
        # plant a couple of gross outliers
        X[:2] += 25.0
        h = default_support(n, d)
        est = fast_mcd(X, n_starts=60, seed=trial)
        want_det, want_subset = exhaustive_mcd(X, h)
        assert est.h == h
        assert est.det_subset == pytest.approx(want_det, rel=1e-9, abs=1e-300)
        assert set(np.where(est.support_mask)[0]) == set(want_subset)


def test_determinant_never_exceeds_full_sample():
    for trial in range(15):
        rng = np.random.default_rng(500 + trial)
        n = int(rng.integers(20, 120))
        d = int(rng.integers(2, 6))
        X = rng.normal(size=(n, d))
        if trial % 2:
            X[: n // 10 + 1] *= 30.0  # heavy contamination
        est = fast_mcd(X, n_starts=10, seed=trial)
        assert est.det_subset <= est.det_full * (1 + 1e-9)
        full_ml_det = float(np.linalg.det(np.cov(X.T, bias=True)))
        assert est.det_full == pytest.approx(full_ml_det, rel=1e-9)


def test_robust_to_gross_outliers():
    rng = np.random.default_rng(11)
    clean = rng.normal(size=(100, 3))
    gross = np.full((5, 3), 50.0)
    X = np.vstack([clean, gross])
    est = fast_mcd(X, seed=1)
    clean_mean = clean.mean(axis=0)
    assert np.linalg.norm(est.robust_mean - clean_mean) < 0.5
    assert np.linalg.norm(X.mean(axis=0) - clean_mean) > 1.0
    assert not est.support_mask[-5:].any()


def test_score_at_mean_is_zero():
    est = MCDEstimate(
        robust_mean=np.zeros(2),
        robust_covariance=np.eye(2),
        support_mask=np.ones(4, bool),
        det_subset=1.0,
        det_full=1.0,
        h=4,
    )
    assert mahalanobis_score(est, np.zeros((1, 2)))[0] == 0.0


def test_identity_covariance_is_euclidean():
    est = MCDEstimate(
        robust_mean=np.zeros(2),
        robust_covariance=np.eye(2),
        support_mask=np.ones(4, bool),
        det_subset=1.0,
        det_full=1.0,
        h=4,
    )
    assert mahalanobis_score(est, np.array([[3.0, 4.0]]))[0] == pytest.approx(5.0)


def test_support_size_and_mask():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 2))
    est = fast_mcd(X, seed=0)
    assert est.support_mask.sum() == est.h == default_support(40, 2)
    est2 = fast_mcd(X, support_fraction=0.9, seed=0)
    assert est2.h == 36


def test_deterministic(rng):
    X = rng.normal(size=(50, 3))
    a = fast_mcd(X, seed=5)
    b = fast_mcd(X, seed=5)
    assert np.array_equal(a.robust_mean, b.robust_mean)
    assert np.array_equal(a.robust_covariance, b.robust_covariance)
    assert np.array_equal(a.support_mask, b.support_mask)


def test_needs_enough_rows():
    with pytest.raises(FitError, match="n > d"):
        fast_mcd(np.zeros((3, 3)))


def test_hyperplane_data_regularized_not_fatal():
    # Exactly collinear data: the +eps*I regularization keeps the estimate
    # usable; points off the hyperplane score enormously.
    rng = np.random.default_rng(1)
    X = np.zeros((30, 2))
    X[:, 0] = rng.normal(size=30)  # second coordinate exactly constant
    est = fast_mcd(X)
    assert est.det_subset == 0.0
    on_plane = mahalanobis_score(est, np.array([[0.1, 0.0]]))[0]
    off_plane = mahalanobis_score(est, np.array([[0.1, 0.5]]))[0]
    assert off_plane > 1e3 * max(on_plane, 1.0)


def test_identical_rows_error():
    X = np.ones((20, 2))
    with pytest.raises(FitError, match="rank-deficient"):
        fast_mcd(X)


def test_detector_wrapper_scores(rng):
    X = rng.normal(size=(120, 3))
    det = EllipticEnvelopeDetector(n_starts=10, seed=2).fit(X)
    far = det.score(np.full((1, 3), 40.0))[0]
    assert far > det.score(X).max()


def test_dimension_mismatch(rng):
    det = EllipticEnvelopeDetector(n_starts=5, seed=0).fit(rng.normal(size=(30, 3)))
    with pytest.raises(SchemaError):
        det.score(rng.normal(size=(5, 2)))


def test_detector_row_equivariance(rng):
    X = rng.normal(size=(60, 3))
    det = EllipticEnvelopeDetector(n_starts=5, seed=1).fit(X)
    Q = rng.normal(size=(30, 3))
    perm = rng.permutation(30)
    assert np.array_equal(det.score(Q)[perm], det.score(Q[perm]))
