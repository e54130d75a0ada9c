import numpy as np
import pytest

from anomkit.detectors import RidgeResidualDetector
from anomkit.errors import FitError, SchemaError

from _oracles import least_squares_with_intercept


def test_exact_linear_data_zero_residuals(rng):
    X = rng.normal(size=(50, 4))
    y = X @ np.array([2.0, -1.0, 0.5, 3.0]) + 7.0
    det = RidgeResidualDetector(lam=0.0).fit(X, y)
    assert det.score(X, y).max() <= 1e-8


def test_unpenalized_matches_normal_equations_oracle(rng):
    X = rng.normal(size=(120, 5))
    y = X @ rng.normal(size=5) + rng.normal(size=120) * 0.3
    det = RidgeResidualDetector(lam=0.0).fit(X, y)
    want = np.abs(y - least_squares_with_intercept(X, y))
    assert np.max(np.abs(det.score(X, y) - want)) < 1e-8


def test_identity_regression_recovers_unit_weight(rng):
    X = rng.normal(size=(80, 3))
    y = X[:, 1].copy()
    det = RidgeResidualDetector(lam=1e-12).fit(X, y)
    # weights live in standardized space: w_j ~ beta_j * std_j
    stds = X.std(axis=0)
    recovered = det.weights_ / stds
    assert recovered[1] == pytest.approx(1.0, abs=1e-6)
    assert abs(recovered[0]) < 1e-6 and abs(recovered[2]) < 1e-6


def test_huge_lambda_scores_become_centered_target(rng):
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60) * 4 + 10
    det = RidgeResidualDetector(lam=1e12).fit(X, y)
    assert np.max(np.abs(det.score(X, y) - np.abs(y - y.mean()))) < 1e-6


def test_singular_lambda_zero_errors():
    X = np.ones((10, 2))  # rank 0 after centering
    y = np.arange(10, dtype=float)
    with pytest.raises(FitError, match="lambda > 0"):
        RidgeResidualDetector(lam=0.0).fit(X, y)


def test_duplicate_column_singular(rng):
    col = rng.normal(size=30)
    X = np.column_stack([col, col])
    with pytest.raises(FitError, match="lambda > 0"):
        RidgeResidualDetector(lam=0.0).fit(X, col)
    RidgeResidualDetector(lam=1.0).fit(X, col)  # regularized fit succeeds


def test_score_requires_target(rng):
    X = rng.normal(size=(20, 2))
    det = RidgeResidualDetector().fit(X, X[:, 0])
    with pytest.raises(SchemaError, match="target"):
        det.score(X)


def test_row_equivariance(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    det = RidgeResidualDetector(lam=0.5).fit(X, y)
    perm = rng.permutation(40)
    assert np.array_equal(det.score(X, y)[perm], det.score(X[perm], y[perm]))
