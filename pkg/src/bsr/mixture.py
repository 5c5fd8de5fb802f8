"""Linear mixture of K trees: design matrix, OLS weights, Gaussian likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LengthMismatch, NonFiniteColumn, NonPositiveVariance
from .infix import parse_infix, to_infix
from .prior import ScaleState
from .tree import count_nonterminal, eval_tree, node_count

RCOND = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)


def design_matrix(trees, X) -> np.ndarray:
    """``n x (K+1)`` matrix: a column of ones, then one column per tree."""
    X = np.asarray(X, dtype=float)
    D = np.empty((X.shape[0], len(trees) + 1))
    D[:, 0] = 1.0
    for i, t in enumerate(trees):
        col = eval_tree(t, X)
        if not np.all(np.isfinite(col)):
            raise NonFiniteColumn(f"tree {i} ({to_infix(t, 4)}) is not finite on the data")
        D[:, i + 1] = col
    return D


def ols_fit(D, y) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares; singular values below ``RCOND * s_max`` are cut."""
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.linalg.lstsq(D, y, rcond=RCOND)[0]
    resid = y - D @ beta
    return beta, float(resid @ resid)


def log_likelihood(rss: float, n: int, sigma2: float) -> float:
    if not sigma2 > 0:
        raise NonPositiveVariance(f"noise variance must be positive, got {sigma2}")
    return -0.5 * n * (_LOG_2PI + math.log(sigma2)) - rss / (2.0 * sigma2)


def profile_log_likelihood(rss: float, n: int) -> float:
    """Log-likelihood at the maximising noise variance ``rss / n``."""
    if rss <= 0:
        return math.inf
    return log_likelihood(rss, n, rss / n)


def _check_lengths(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    return a, b


def rmse(y_hat, y) -> float:
    y_hat, y = _check_lengths(y_hat, y)
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


def sign_accuracy(y_hat, y) -> float:
    """Fraction of matching signs, counting zero as positive."""
    y_hat, y = _check_lengths(y_hat, y)
    return float(np.mean((y_hat >= 0) == (y >= 0)))


@dataclass
class MixedModel:
    trees: list
    beta: np.ndarray
    scales: ScaleState
    fitted_cache: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if len(self.beta) != len(self.trees) + 1:
            raise ValueError(f"need {len(self.trees) + 1} coefficients, got {len(self.beta)}")

    @property
    def K(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        return design_matrix(self.trees, X) @ self.beta

    def node_counts(self) -> list[int]:
        return [node_count(t) for t in self.trees]

    def total_nodes(self) -> int:
        return sum(self.node_counts())

    def expressions(self, precision: int | None = None) -> list[str]:
        return [to_infix(t, precision) for t in self.trees]

    def formula(self, precision: int = 4) -> str:
        """``y = (b0) + (b1)*[g1] + ...`` with rounded numbers."""
        parts = [f"({self.beta[0]:.{precision}g})"]
        for b, expr in zip(self.beta[1:], self.expressions(precision)):
            parts.append(f"({b:.{precision}g})*[{expr}]")
        return "y = " + " + ".join(parts)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "expressions": self.expressions(),
            "display": self.formula(),
            "beta": [float(b) for b in self.beta],
            "sigma2": self.scales.sigma2,
            "sigma_a2": self.scales.sigma_a2,
            "sigma_b2": self.scales.sigma_b2,
            "node_counts": self.node_counts(),
            "nonterminal_counts": [count_nonterminal(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixedModel":
        trees = [parse_infix(s) for s in d["expressions"]]
        scales = ScaleState(d.get("sigma_a2", 1.0), d.get("sigma_b2", 1.0), d.get("sigma2", 1.0))
        return cls(trees, np.asarray(d["beta"], dtype=float), scales)


def node_total(trees) -> int:
    return sum(node_count(t) for t in trees)

