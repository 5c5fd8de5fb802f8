import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bsr import BayesianSymbolicRegressor


def test_fit_predict_and_params():
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, size=(80, 2))
    y = 6 * np.sin(X[:, 0]) * np.cos(X[:, 1])
    est = BayesianSymbolicRegressor(n_proposals=800, operators="benchmark", random_state=3)
    assert clone(est).get_params() == est.get_params()
    est.fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (80,)
    assert np.sqrt(np.mean((pred - y) ** 2)) == pytest.approx(est.train_rmse_)
    assert len(est.coef_) == 2 and len(est.expressions_) == 2
    assert est.score(X, y) <= 1.0
    assert est.formula().startswith("y = ")


def test_validation():
    est = BayesianSymbolicRegressor(n_proposals=50)
    with pytest.raises(NotFittedError):
        est.predict([[1.0, 2.0]])
    with pytest.raises(ValueError):
        est.fit([[1.0, np.nan]], [1.0])
    est.fit(np.ones((5, 2)) * np.arange(5)[:, None], np.arange(5.0))
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 3)))


def test_same_seed_same_model():
    rng = np.random.default_rng(1)
    X = rng.uniform(-3, 3, size=(40, 2))
    y = X[:, 0] ** 2
    a = BayesianSymbolicRegressor(n_proposals=300, random_state=5).fit(X, y)
    b = BayesianSymbolicRegressor(n_proposals=300, random_state=5).fit(X, y)
    assert a.expressions_ == b.expressions_
