"""scikit-learn style wrapper around the sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .mixture import MixedModel
from .operators import operator_set
from .prior import PriorConfig
from .sampler import Data, RunConfig, run


class BayesianSymbolicRegressor(RegressorMixin, BaseEstimator):
    """Linear mixture of K expression trees sampled by reversible-jump MCMC.

    After ``fit`` the estimator exposes ``model_`` (the best visited
    :class:`MixedModel`), ``expressions_``, ``coef_``, ``intercept_`` and,
    if ``record_trace`` is set, ``trace_`` (list of chain records).
    """

    def __init__(self, K=2, n_proposals=20_000, operators="default", alpha=0.4, beta=1.2,
                 nu_a=2.0, lambda_a=1.0, nu_b=2.0, lambda_b=1.0, nu=2.0, lambda_=1.0,
                 max_depth=15, burn_in=None, thinning=1, gibbs_noise=True,
                 record_trace=False, random_state=0):
        self.K = K
        self.n_proposals = n_proposals
        self.operators = operators
        self.alpha = alpha
        self.beta = beta
        self.nu_a = nu_a
        self.lambda_a = lambda_a
        self.nu_b = nu_b
        self.lambda_b = lambda_b
        self.nu = nu
        self.lambda_ = lambda_
        self.max_depth = max_depth
        self.burn_in = burn_in
        self.thinning = thinning
        self.gibbs_noise = gibbs_noise
        self.record_trace = record_trace
        self.random_state = random_state

    def _run_config(self) -> RunConfig:
        prior = PriorConfig(
            alpha=self.alpha, beta=self.beta, operators=operator_set(self.operators),
            nu_a=self.nu_a, lambda_a=self.lambda_a, nu_b=self.nu_b, lambda_b=self.lambda_b,
            nu=self.nu, lambda_=self.lambda_, K=self.K, max_depth=self.max_depth,
        )
        seed = self.random_state if self.random_state is not None else 0
        return RunConfig(prior=prior, n_proposals=self.n_proposals, burn_in=self.burn_in,
                         thinning=self.thinning, seed=int(seed), record_trace=self.record_trace,
                         gibbs_noise=self.gibbs_noise)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        cfg = self._run_config()
        res = run(cfg, Data(X, y))
        self.model_ = res.best_model
        self.n_features_in_ = X.shape[1]
        self.expressions_ = res.best_model.expressions()
        self.intercept_ = float(res.best_model.beta[0])
        self.coef_ = res.best_model.beta[1:].copy()
        self.acceptance_rate_ = res.acceptance_rate
        self.train_rmse_ = float(np.sqrt(res.best_rss / len(y)))
        if self.record_trace:
            self.trace_ = res.records
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.model_.predict(X)

    def formula(self, precision: int = 4) -> str:
        check_is_fitted(self, "model_")
        return self.model_.formula(precision)

    @classmethod
    def from_model(cls, model: MixedModel, n_features: int, **params):
        est = cls(K=model.K, **params)
        est.model_ = model
        est.n_features_in_ = n_features
        est.expressions_ = model.expressions()
        est.intercept_ = float(model.beta[0])
        est.coef_ = model.beta[1:].copy()
        return est
