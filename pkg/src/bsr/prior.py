"""Generative prior over expression trees and the variance hyperpriors.

Inverse-gamma laws are parameterised as IG(shape, rate), with density
proportional to ``x**(-shape-1) * exp(-rate/x)``. A hyperparameter pair
``(nu, lam)`` maps to ``IG(nu/2, nu*lam/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .exceptions import NonPositiveScale, UnknownOperator
from .operators import OperatorSet, default_operators, operator_set
from .tree import Node, NonTerminal, Terminal, get_params

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ScaleState:
    sigma_a2: float
    sigma_b2: float
    sigma2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise NonPositiveScale(f"{f.name} must be positive, got {getattr(self, f.name)}")


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the tree, parameter and noise priors.

    ``w_ft=None`` means uniform over however many features the data has.
    """

    alpha: float = 0.4
    beta: float = 1.2
    operators: OperatorSet = field(default_factory=default_operators)
    w_ft: tuple | None = None
    nu_a: float = 2.0
    lambda_a: float = 1.0
    nu_b: float = 2.0
    lambda_b: float = 1.0
    nu: float = 2.0
    lambda_: float = 1.0
    K: int = 2
    max_depth: int = 15

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        for name in ("nu_a", "lambda_a", "nu_b", "lambda_b", "nu", "lambda_"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 1 or self.max_depth < 1:
            raise ValueError("K and max_depth must be positive integers")
        if not isinstance(self.operators, OperatorSet):
            object.__setattr__(self, "operators", operator_set(self.operators))
        if self.w_ft is not None:
            w = np.asarray(self.w_ft, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("w_ft must be non-negative and sum to 1")
            object.__setattr__(self, "w_ft", tuple(float(v) for v in w))

    def with_features(self, d: int) -> "PriorConfig":
        """Bind a uniform w_ft for ``d`` features if none was given."""
        if self.w_ft is None:
            return replace(self, w_ft=tuple([1.0 / d] * d))
        if len(self.w_ft) != d:
            raise ValueError(f"w_ft has {len(self.w_ft)} entries but the data has {d} features")
        return self

    @property
    def n_features(self) -> int:
        if self.w_ft is None:
            raise ValueError("feature weights are unbound; call with_features(d) first")
        return len(self.w_ft)

    def shape_rate(self, which: str) -> tuple[float, float]:
        nu, lam = {
            "a": (self.nu_a, self.lambda_a),
            "b": (self.nu_b, self.lambda_b),
            "noise": (self.nu, self.lambda_),
        }[which]
        return nu / 2.0, nu * lam / 2.0

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["operators"] = self.operators.to_dict()
        out["w_ft"] = None if self.w_ft is None else list(self.w_ft)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PriorConfig":
        d = dict(d)
        if "operators" in d:
            d["operators"] = operator_set(d["operators"])
        if d.get("w_ft") is not None:
            d["w_ft"] = tuple(d["w_ft"])
        return cls(**d)


# -- inverse gamma -----------------------------------------------------------


def invgamma_logpdf(x: float, shape: float, rate: float) -> float:
    if not x > 0:
        raise NonPositiveScale(f"inverse-gamma density evaluated at {x}")
    return shape * math.log(rate) - math.lgamma(shape) - (shape + 1.0) * math.log(x) - rate / x


def invgamma_rvs(shape: float, rate: float, rng: np.random.Generator, size=None):
    return rate / rng.gamma(shape, 1.0, size=size)


def sample_scales(cfg: PriorConfig, rng: np.random.Generator) -> ScaleState:
    """Independent draws of (sigma_a^2, sigma_b^2, sigma^2) from their hyperpriors."""
    return ScaleState(
        float(invgamma_rvs(*cfg.shape_rate("a"), rng)),
        float(invgamma_rvs(*cfg.shape_rate("b"), rng)),
        float(invgamma_rvs(*cfg.shape_rate("noise"), rng)),
    )


def log_hyperprior_theta(sigma_a2: float, sigma_b2: float, cfg: PriorConfig) -> float:
    return invgamma_logpdf(sigma_a2, *cfg.shape_rate("a")) + invgamma_logpdf(
        sigma_b2, *cfg.shape_rate("b")
    )


def log_hyperprior(scale: ScaleState, cfg: PriorConfig) -> float:
    return log_hyperprior_theta(scale.sigma_a2, scale.sigma_b2, cfg) + invgamma_logpdf(
        scale.sigma2, *cfg.shape_rate("noise")
    )


# -- structure prior ---------------------------------------------------------


def split_probability(depth: int, cfg: PriorConfig) -> float:
    if depth >= cfg.max_depth:
        return 0.0
    return cfg.alpha * (1.0 + depth) ** (-cfg.beta)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _sample_feature(w_ft, rng) -> int:
    u = rng.random()
    acc = 0.0
    for i, w in enumerate(w_ft):
        acc += w
        if u < acc:
            return i
    return max(i for i, w in enumerate(w_ft) if w > 0)


def sample_subtree(depth: int, cfg: PriorConfig, rng, scales: ScaleState | None = None) -> Node:
    """Grow a subtree whose root sits at absolute ``depth``.

    lt parameters are drawn from N(1, sigma_a^2) and N(0, sigma_b^2) when
    ``scales`` is given and left empty otherwise.
    """
    if rng.random() < split_probability(depth, cfg):
        return grow_node(depth, cfg.operators.sample(rng), cfg, rng, scales)
    return Terminal(_sample_feature(cfg.w_ft, rng))


def grow_node(depth, op, cfg, rng, scales=None, first_child=None) -> NonTerminal:
    """A non-terminal with operator ``op`` whose (remaining) children come from the prior."""
    if first_child is None:
        children = tuple(sample_subtree(depth + 1, cfg, rng, scales) for _ in range(op.arity))
    else:
        children = (first_child,) + tuple(
            sample_subtree(depth + 1, cfg, rng, scales) for _ in range(op.arity - 1)
        )
    params = None
    if op.has_params and scales is not None:
        params = draw_lt_params(scales, rng)
    return NonTerminal(op, children, params)


def draw_lt_params(scales: ScaleState, rng) -> tuple[float, float]:
    a = 1.0 + math.sqrt(scales.sigma_a2) * rng.standard_normal()
    b = math.sqrt(scales.sigma_b2) * rng.standard_normal()
    return (float(a), float(b))


def sample_tree(cfg: PriorConfig, rng: np.random.Generator, scales: ScaleState | None = None) -> Node:
    """Draw (T, M, Theta) from the prior; scales are drawn from the hyperprior if not given."""
    if cfg.w_ft is None:
        raise ValueError("bind feature weights with cfg.with_features(d) before sampling")
    if scales is None:
        scales = sample_scales(cfg, rng)
    return sample_subtree(0, cfg, rng, scales)


def log_prior_subtree(node: Node, depth: int, cfg: PriorConfig) -> float:
    """Log generation probability of ``node`` grown from absolute ``depth``."""
    if isinstance(node, Terminal):
        w = cfg.w_ft[node.feature] if node.feature < len(cfg.w_ft) else 0.0
        return _log(1.0 - split_probability(depth, cfg)) + _log(w)
    total = _log(split_probability(depth, cfg))
    if node.op.name not in cfg.operators:
        raise UnknownOperator(node.op.name)
    total += cfg.operators.log_weight(node.op)
    for c in node.children:
        total += log_prior_subtree(c, depth + 1, cfg)
    return total


def log_prior_structure(tree: Node, cfg: PriorConfig) -> float:
    """Exact log p(T, M) under the recursive generative prior."""
    return log_prior_subtree(tree, 0, cfg)


def normal_logpdf(x, mean, var) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * (_LOG_2PI + np.log(var)) - (x - mean) ** 2 / (2.0 * var)))


def log_prior_pairs(pairs, sigma_a2: float, sigma_b2: float) -> float:
    """Sum of log N(a; 1, sigma_a^2) + log N(b; 0, sigma_b^2) over the pairs."""
    if len(pairs) == 0:
        return 0.0
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return normal_logpdf(arr[:, 0], 1.0, sigma_a2) + normal_logpdf(arr[:, 1], 0.0, sigma_b2)


def log_prior_params(tree: Node, scale: ScaleState) -> float:
    return log_prior_pairs(get_params(tree), scale.sigma_a2, scale.sigma_b2)
