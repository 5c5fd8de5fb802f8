import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsr.exceptions import LengthMismatch, NonFiniteColumn, NonPositiveVariance
from bsr.mixture import MixedModel, design_matrix, log_likelihood, ols_fit, rmse, sign_accuracy
from bsr.prior import ScaleState

from conftest import node, x


def normal_equations(D, y):
    beta = np.linalg.solve(D.T @ D, D.T @ y)
    r = y - D @ beta
    return beta, float(r @ r)


def test_design_matrix_example():
    np.testing.assert_array_equal(design_matrix([x(1)], [[2.0], [3.0]]), [[1, 2], [1, 3]])


def test_design_matrix_nonfinite():
    with pytest.raises(NonFiniteColumn):
        design_matrix([node("inv", x(1))], [[0.0], [1.0]])


def test_ols_two_by_two():
    beta, rss = ols_fit([[1, 2], [1, 3]], [5, 7])
    np.testing.assert_allclose(beta, [1, 2], atol=1e-12)
    assert rss == pytest.approx(0.0, abs=1e-20)


def test_ols_duplicate_column_matches_single_column():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 1))
    y = 2 * X[:, 0] + 1 + rng.normal(scale=0.1, size=30)
    D1 = design_matrix([x(1)], X)
    D2 = design_matrix([x(1), x(1)], X)
    b1, r1 = ols_fit(D1, y)
    b2, r2 = ols_fit(D2, y)
    assert np.all(np.isfinite(b2))
    assert r2 == pytest.approx(r1, rel=1e-10)
    # minimum norm splits the slope evenly
    assert b2[1] == pytest.approx(b2[2]) and b2[1] + b2[2] == pytest.approx(b1[1])


def test_ols_orthogonal_columns_give_intercept_only():
    D = np.array([[1, 1], [1, -1], [1, 1], [1, -1]], dtype=float)
    beta, _ = ols_fit(D, [3.0, 3.0, 3.0, 3.0])
    np.testing.assert_allclose(beta, [3.0, 0.0], atol=1e-12)


def test_ols_matches_normal_equations_oracle():
    rng = np.random.default_rng(1)
    for _ in range(100):
        K = int(rng.integers(1, 5))
        n = int(rng.integers(K + 2, 51))
        D = np.column_stack([np.ones(n), rng.normal(size=(n, K))])
        y = rng.normal(size=n)
        b, r = ols_fit(D, y)
        bo, ro = normal_equations(D, y)
        np.testing.assert_allclose(b, bo, rtol=1e-8, atol=1e-12)
        assert abs(r - ro) <= 1e-8 * max(ro, 1e-300)


def test_ols_local_optimality():
    rng = np.random.default_rng(2)
    D = np.column_stack([np.ones(40), rng.normal(size=(40, 3))])
    y = rng.normal(size=40)
    b, r = ols_fit(D, y)
    for _ in range(1000):
        bp = b + rng.normal(scale=0.01, size=b.size)
        res = y - D @ bp
        assert r <= res @ res


def test_log_likelihood_examples():
    assert log_likelihood(0.0, 1, 1 / (2 * math.pi)) == pytest.approx(0.0, abs=1e-15)
    assert log_likelihood(2.0, 2, 1.0) == pytest.approx(-math.log(2 * math.pi) - 1)
    with pytest.raises(NonPositiveVariance):
        log_likelihood(1.0, 1, 0.0)


@settings(max_examples=100, deadline=None)
@given(r1=st.floats(0, 1e6), dr=st.floats(1e-6, 1e6), n=st.integers(1, 1000), s2=st.floats(1e-3, 1e3))
def test_log_likelihood_decreasing_in_rss(r1, dr, n, s2):
    assert log_likelihood(r1 + dr, n, s2) < log_likelihood(r1, n, s2)


def test_rmse_and_sign_accuracy():
    assert rmse([1, 2], [1, 2]) == 0.0
    assert sign_accuracy([1, 2], [1, 2]) == 1.0
    assert sign_accuracy([1, -1], [-1, 1]) == 0.0
    assert rmse([3, 0], [1, 2]) == pytest.approx(2.0)
    assert sign_accuracy([0.0], [5.0]) == 1.0
    with pytest.raises(LengthMismatch):
        rmse([1], [1, 2])


def test_mixed_model_roundtrip():
    trees = [node("lt", x(1), params=(1.25, -0.5)), node("exp", x(2))]
    m = MixedModel(trees, [0.1, 2.0, -3.0], ScaleState(0.5, 0.6, 0.7))
    back = MixedModel.from_dict(m.to_dict())
    X = np.random.default_rng(0).normal(size=(10, 2))
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
    assert back.to_dict() == m.to_dict()
    assert m.formula().startswith("y = (0.1) + (2)*[(1.25*x1-0.5)]")


def test_mixed_model_beta_length():
    with pytest.raises(ValueError):
        MixedModel([x(1)], [1.0], ScaleState(1, 1))
