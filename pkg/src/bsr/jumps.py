"""Trans-dimensional moves for the lt parameter vector.

Parameters are stored as an ``(m, 2)`` array of ``(a, b)`` pairs. When a
structure move changes the number of lt nodes, the pairs are mapped through
one of two bijections:

expansion (m -> m' > m)
    ``U* = (theta - u)/2``, ``theta* = ((theta + u)/2, u_new)`` with
    ``u, u_new`` drawn from N(1, sigma_a^2) / N(0, sigma_b^2) slotwise.
shrinkage (m -> m' < m), with theta split into kept and dropped rows
    ``theta* = theta_kept + u``, ``U* = (theta_kept - u, theta_dropped)``
    with ``u`` drawn from N(0, sigma_a^2) / N(0, sigma_b^2).

Both draw fresh (sigma_a^2, sigma_b^2) from the hyperprior, which become the
new scale state. Each map is the inverse of the other, so the reverse
auxiliary density of one is the forward density of the other evaluated at
the old scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .prior import PriorConfig, ScaleState, invgamma_rvs, log_hyperprior_theta, normal_logpdf

LOG2 = math.log(2.0)


@dataclass
class JumpResult:
    new_params: np.ndarray
    log_h_forward: float
    log_h_reverse: float
    log_jacobian: float
    new_scales: ScaleState

    @property
    def log_ratio(self) -> float:
        return self.log_h_reverse - self.log_h_forward + self.log_jacobian


def as_pairs(theta) -> np.ndarray:
    arr = np.asarray(theta, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        arr = arr.reshape(-1, 2)
    return arr


def _aux_logpdf(u: np.ndarray, sigma_a2, sigma_b2, centred: bool) -> float:
    """Density of auxiliary pairs; ``centred`` selects the N(0, .) law for the a slot."""
    if u.size == 0:
        return 0.0
    mean_a = 0.0 if centred else 1.0
    return normal_logpdf(u[:, 0], mean_a, sigma_a2) + normal_logpdf(u[:, 1], 0.0, sigma_b2)


def _aux_draw(n: int, sigma_a2, sigma_b2, centred: bool, rng) -> np.ndarray:
    z = rng.standard_normal((n, 2))
    out = np.empty((n, 2))
    out[:, 0] = (0.0 if centred else 1.0) + math.sqrt(sigma_a2) * z[:, 0]
    out[:, 1] = math.sqrt(sigma_b2) * z[:, 1]
    return out


def _draw_theta_scales(cfg: PriorConfig, rng) -> tuple[float, float]:
    return (float(invgamma_rvs(*cfg.shape_rate("a"), rng)), float(invgamma_rvs(*cfg.shape_rate("b"), rng)))


# -- the deterministic bijections -------------------------------------------


def j_expand(theta, u_theta, u_new):
    """Return ``(u_star, theta_star)``."""
    theta, u_theta, u_new = as_pairs(theta), as_pairs(u_theta), as_pairs(u_new)
    if theta.shape != u_theta.shape:
        raise DimensionError("u_theta must match theta in shape")
    return (theta - u_theta) / 2.0, np.vstack([(theta + u_theta) / 2.0, u_new])


def j_shrink(theta_kept, theta_dropped, u):
    """Return ``(theta_star, u_star)`` where ``u_star = (theta_kept - u, theta_dropped)``."""
    theta_kept, theta_dropped, u = as_pairs(theta_kept), as_pairs(theta_dropped), as_pairs(u)
    if theta_kept.shape != u.shape:
        raise DimensionError("u must match the kept parameters in shape")
    return theta_kept + u, np.vstack([theta_kept - u, theta_dropped])


def expand_log_jacobian(n_shared_pairs: int) -> float:
    # per shared scalar the map is [[1/2, 1/2], [-1/2, 1/2]] up to ordering: |det| = 1/2
    return -2 * n_shared_pairs * LOG2


def shrink_log_jacobian(n_kept_pairs: int) -> float:
    # per kept scalar [[1, 1], [1, -1]]: |det| = 2
    return 2 * n_kept_pairs * LOG2


# -- stochastic jumps ---------------------------------------------------------


def no_change_resample(theta, scale: ScaleState, rng, n_pairs: int | None = None):
    """Fresh i.i.d. prior draws for every lt pair.

    Returns ``(new_params, log_q_new, log_q_old)``: the proposal density of
    the draw and of the old parameters under the same law.
    """
    theta = as_pairs(theta)
    if n_pairs is not None and n_pairs != len(theta):
        raise DimensionError(f"no-change resampling needs {len(theta)} pairs, got {n_pairs}")
    new = _aux_draw(len(theta), scale.sigma_a2, scale.sigma_b2, False, rng)
    return (
        new,
        _aux_logpdf(new, scale.sigma_a2, scale.sigma_b2, False),
        _aux_logpdf(theta, scale.sigma_a2, scale.sigma_b2, False),
    )


def expand(theta, new_dim_pairs: int, cfg: PriorConfig, rng, scale: ScaleState) -> JumpResult:
    """Expansion jump from ``len(theta)`` to ``new_dim_pairs`` pairs.

    ``scale`` is the current state; its (sigma_a^2, sigma_b^2) enter the
    reverse shrinkage density.
    """
    theta = as_pairs(theta)
    m = len(theta)
    if new_dim_pairs <= m:
        raise DimensionError(f"expansion needs more than {m} pairs, got {new_dim_pairs}")
    sa2, sb2 = _draw_theta_scales(cfg, rng)
    u_theta = _aux_draw(m, sa2, sb2, False, rng)
    u_new = _aux_draw(new_dim_pairs - m, sa2, sb2, False, rng)
    u_star, theta_star = j_expand(theta, u_theta, u_new)
    log_h_fwd = (
        log_hyperprior_theta(sa2, sb2, cfg)
        + _aux_logpdf(u_theta, sa2, sb2, False)
        + _aux_logpdf(u_new, sa2, sb2, False)
    )
    log_h_rev = log_hyperprior_theta(scale.sigma_a2, scale.sigma_b2, cfg) + _aux_logpdf(
        u_star, scale.sigma_a2, scale.sigma_b2, True
    )
    assert theta.size + u_theta.size + u_new.size == theta_star.size + u_star.size
    return JumpResult(
        theta_star, log_h_fwd, log_h_rev, expand_log_jacobian(m), ScaleState(sa2, sb2, scale.sigma2)
    )


def shrink(theta, kept_pairs, cfg: PriorConfig, rng, scale: ScaleState) -> JumpResult:
    """Shrinkage jump keeping the rows ``kept_pairs`` (in that order) of ``theta``."""
    theta = as_pairs(theta)
    kept_pairs = list(kept_pairs)
    if len(set(kept_pairs)) != len(kept_pairs) or any(not 0 <= i < len(theta) for i in kept_pairs):
        raise DimensionError(f"invalid kept indices {kept_pairs} for {len(theta)} pairs")
    if len(kept_pairs) >= len(theta):
        raise DimensionError("shrinkage must drop at least one pair")
    dropped = [i for i in range(len(theta)) if i not in set(kept_pairs)]
    theta_kept, theta_dropped = theta[kept_pairs], theta[dropped]
    sa2, sb2 = _draw_theta_scales(cfg, rng)
    u = _aux_draw(len(kept_pairs), sa2, sb2, True, rng)
    theta_star, u_star = j_shrink(theta_kept, theta_dropped, u)
    log_h_fwd = log_hyperprior_theta(sa2, sb2, cfg) + _aux_logpdf(u, sa2, sb2, True)
    # reverse expansion would have drawn u_star from the non-centred law at the old scales
    log_h_rev = log_hyperprior_theta(scale.sigma_a2, scale.sigma_b2, cfg) + _aux_logpdf(
        u_star, scale.sigma_a2, scale.sigma_b2, False
    )
    assert theta.size + u.size == theta_star.size + u_star.size
    return JumpResult(
        theta_star, log_h_fwd, log_h_rev, shrink_log_jacobian(len(kept_pairs)), ScaleState(sa2, sb2, scale.sigma2)
    )
