import math

import numpy as np
import pytest

from satfuse.errors import PipelineError
from satfuse.evaluation import mae, rmse


def rmse_reference(y, y_hat):
    """Brute-force oracle: explicit loop with compensated summation."""
    total = math.fsum((a - b) ** 2 for a, b in zip(y, y_hat))
    return math.sqrt(total / len(y))


def mae_reference(y, y_hat):
    return math.fsum(abs(a - b) for a, b in zip(y, y_hat)) / len(y)


def test_perfect_prediction():
    y = [1.0, 2.0, 3.0]
    assert rmse(y, y) == 0.0
    assert mae(y, y) == 0.0


def test_constant_offset():
    assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0
    assert mae([0.0, 0.0], [1.0, 1.0]) == 1.0


def test_hand_arithmetic():
    assert rmse([1.0, 4.0], [1.0, 2.0]) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert mae([1.0, 4.0], [1.0, 2.0]) == 1.0


def test_against_bruteforce_oracle_1000_pairs():
    rng = np.random.default_rng(41)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        y = rng.uniform(-10, 10, n)
        y_hat = rng.uniform(-10, 10, n)
        assert abs(rmse(y, y_hat) - rmse_reference(y, y_hat)) < 1e-12
        assert abs(mae(y, y_hat) - mae_reference(y, y_hat)) < 1e-12
        assert rmse(y, y_hat) >= mae(y, y_hat) - 1e-15


def test_permutation_invariance():
    rng = np.random.default_rng(42)
    y = rng.uniform(1, 5, 50)
    y_hat = rng.uniform(1, 5, 50)
    perm = rng.permutation(50)
    assert rmse(y, y_hat) == pytest.approx(rmse(y[perm], y_hat[perm]), abs=1e-15)
    assert mae(y, y_hat) == pytest.approx(mae(y[perm], y_hat[perm]), abs=1e-15)


def test_length_mismatch_fatal():
    with pytest.raises(PipelineError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(PipelineError):
        mae([], [])


def test_non_finite_fatal():
    with pytest.raises(PipelineError):
        rmse([1.0, float("nan")], [1.0, 1.0])
