import numpy as np
import pytest

from satfuse.regress import fit_linear


def test_exact_recovery_on_noiseless_line():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([2.0, 4.0, 6.0])
    model = fit_linear(X, y, lam=0.0)
    assert model.weights[0] == pytest.approx(2.0, abs=1e-12)
    assert model.intercept == pytest.approx(0.0, abs=1e-12)


def test_huge_lambda_shrinks_to_mean():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 4))
    y = rng.standard_normal(50) + 3.0
    model = fit_linear(X, y, lam=1e12)
    assert np.max(np.abs(model.weights)) < 1e-9
    np.testing.assert_allclose(model.predict(X), np.full(50, y.mean()), atol=1e-6)


def test_centered_closed_form_hand_computation():
    # (0,0), (1,1) with lam=1: w = Sxy / (Sxx + lam) = 0.5 / 1.5, b = ybar - w xbar.
    X = np.array([[0.0], [1.0]])
    y = np.array([0.0, 1.0])
    model = fit_linear(X, y, lam=1.0)
    assert model.weights[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert model.intercept == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_rank_deficient_warns_minimum_norm():
    # Duplicate column: infinitely many solutions; lstsq picks minimum norm.
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([2.0, 4.0, 6.0])
    with pytest.warns(RuntimeWarning, match="rank"):
        model = fit_linear(X, y, lam=0.0)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-10)
    # Minimum-norm splits the weight evenly across the duplicated columns.
    np.testing.assert_allclose(model.weights, [1.0, 1.0], atol=1e-10)


def test_ridge_shrinkage_monotone_in_lambda():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((80, 6))
    y = X @ rng.standard_normal(6) + 0.1 * rng.standard_normal(80)
    norms = [np.linalg.norm(fit_linear(X, y, lam=lam).weights)
             for lam in (0.0, 0.1, 1.0, 10.0, 100.0)]
    for a, b in zip(norms, norms[1:]):
        assert a >= b - 1e-12, norms


def test_tiny_lambda_matches_ols():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((100, 5))
    y = X @ np.array([1.0, -2.0, 0.5, 3.0, 0.0]) + 0.05 * rng.standard_normal(100)
    ols = fit_linear(X, y, lam=0.0)
    ridge = fit_linear(X, y, lam=1e-12)
    diff = ols.predict(X) - ridge.predict(X)
    assert np.sqrt(np.mean(diff ** 2)) < 1e-6


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        fit_linear(np.array([[np.inf]]), np.array([1.0]))


def test_single_row():
    model = fit_linear(np.array([[5.0, 2.0]]), np.array([4.0]), lam=0.0)
    assert model.predict(np.array([[5.0, 2.0]]))[0] == pytest.approx(4.0)
