"""Bayesian symbolic regression with reversible-jump MCMC over expression trees."""

from .estimator import BayesianSymbolicRegressor
from .infix import parse_infix, to_infix
from .mixture import MixedModel
from .operators import OperatorSet, benchmark_operators, default_operators
from .prior import PriorConfig, ScaleState
from .sampler import Data, RunConfig, run

__all__ = [
    "BayesianSymbolicRegressor",
    "Data",
    "MixedModel",
    "OperatorSet",
    "PriorConfig",
    "RunConfig",
    "ScaleState",
    "benchmark_operators",
    "default_operators",
    "parse_infix",
    "run",
    "to_infix",
]
