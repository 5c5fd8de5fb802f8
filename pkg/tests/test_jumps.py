import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsr.exceptions import DimensionError
from bsr.jumps import (
    LOG2,
    expand,
    expand_log_jacobian,
    j_expand,
    j_shrink,
    no_change_resample,
    shrink,
    shrink_log_jacobian,
)
from bsr.prior import PriorConfig, ScaleState


def numerical_log_jacobian(f, z, h=1e-6):
    """log|det| of the Jacobian of ``f`` at ``z`` by central differences."""
    z = np.asarray(z, dtype=float)
    n = z.size
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (f(z + e) - f(z - e)) / (2 * h)
    return math.log(abs(np.linalg.det(J)))


def expand_flat(m, k):
    """j_e as a map R^(4m+2k) -> R^(4m+2k): (theta, u_theta, u_new) -> (theta*, u*)."""
    def f(z):
        theta, u, un = z[: 2 * m], z[2 * m: 4 * m], z[4 * m:]
        u_star, theta_star = j_expand(theta.reshape(-1, 2), u.reshape(-1, 2), un.reshape(-1, 2))
        return np.concatenate([theta_star.ravel(), u_star.ravel()])
    return f


def shrink_flat(m, k):
    """j_s on (theta_kept, theta_dropped, u) -> (theta*, u*)."""
    def f(z):
        tk, td, u = z[: 2 * m], z[2 * m: 2 * m + 2 * k], z[2 * m + 2 * k:]
        theta_star, u_star = j_shrink(tk.reshape(-1, 2), td.reshape(-1, 2), u.reshape(-1, 2))
        return np.concatenate([theta_star.ravel(), u_star.ravel()])
    return f


def test_analytic_jacobian_values():
    assert expand_log_jacobian(0) == 0.0
    assert expand_log_jacobian(1) == pytest.approx(2 * math.log(0.5))
    assert shrink_log_jacobian(1) == pytest.approx(2 * LOG2)
    for m in range(5):
        assert expand_log_jacobian(m) + shrink_log_jacobian(m) == 0.0


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m, k = int(rng.integers(0, 4)), int(rng.integers(1, 3))
        z = rng.normal(size=4 * m + 2 * k)
        num = numerical_log_jacobian(expand_flat(m, k), z)
        ana = expand_log_jacobian(m)
        assert abs(num - ana) <= 1e-6 * max(1.0, abs(ana))
        z = rng.normal(size=4 * m + 2 * k)
        num = numerical_log_jacobian(shrink_flat(m, k), z)
        ana = shrink_log_jacobian(m)
        assert abs(num - ana) <= 1e-6 * max(1.0, abs(ana))


@settings(max_examples=100, deadline=None)
@given(m=st.integers(0, 4), k=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_expand_shrink_roundtrip(m, k, seed):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=(m, 2))
    u = rng.normal(size=(m, 2))
    un = rng.normal(size=(k, 2))
    u_star, theta_star = j_expand(theta, u, un)
    # shrink back: kept = first m rows, dropped = the new ones, auxiliary = u_star
    back, u_back = j_shrink(theta_star[:m], theta_star[m:], u_star)
    np.testing.assert_allclose(back, theta, atol=1e-12)
    np.testing.assert_allclose(u_back[:m], u, atol=1e-12)
    np.testing.assert_allclose(u_back[m:], un, atol=1e-12)


def test_expand_from_empty_is_birth():
    u_star, theta_star = j_expand(np.zeros((0, 2)), np.zeros((0, 2)), [[1.5, -0.2]])
    assert u_star.shape == (0, 2)
    np.testing.assert_array_equal(theta_star, [[1.5, -0.2]])


def test_full_death():
    theta_star, u_star = j_shrink(np.zeros((0, 2)), [[2.0, 3.0]], np.zeros((0, 2)))
    assert theta_star.shape == (0, 2)
    np.testing.assert_array_equal(u_star, [[2.0, 3.0]])
    assert shrink_log_jacobian(0) == 0.0


def test_stochastic_jumps_dimensions_and_densities():
    cfg = PriorConfig()
    rng = np.random.default_rng(4)
    scale = ScaleState(0.7, 1.3, 2.0)
    for _ in range(200):
        m = int(rng.integers(0, 4))
        theta = rng.normal(size=(m, 2))
        res = expand(theta, m + int(rng.integers(1, 3)), cfg, rng, scale)
        assert math.isfinite(res.log_h_forward) and math.isfinite(res.log_h_reverse)
        assert res.log_jacobian == expand_log_jacobian(m)
        assert res.new_scales.sigma2 == 2.0
        if m >= 1:
            kept = sorted(rng.choice(m, size=int(rng.integers(0, m)), replace=False).tolist())
            res = shrink(theta, kept, cfg, rng, scale)
            assert res.new_params.shape == (len(kept), 2)
            assert math.isfinite(res.log_ratio)
            assert res.log_jacobian == shrink_log_jacobian(len(kept))


def test_dimension_errors():
    cfg = PriorConfig()
    rng = np.random.default_rng(0)
    s = ScaleState(1.0, 1.0)
    with pytest.raises(DimensionError):
        expand(np.zeros((2, 2)), 2, cfg, rng, s)
    with pytest.raises(DimensionError):
        shrink(np.zeros((2, 2)), [0, 1], cfg, rng, s)
    with pytest.raises(DimensionError):
        j_expand(np.zeros((2, 2)), np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(DimensionError):
        no_change_resample(np.zeros((2, 2)), s, rng, n_pairs=3)


def test_no_change_examples():
    s = ScaleState(1.0, 1.0)
    new, lq_new, lq_old = no_change_resample(np.zeros((0, 2)), s, np.random.default_rng(0))
    assert new.shape == (0, 2) and lq_new == 0.0 and lq_old == 0.0
    _, _, lq_old = no_change_resample([[1.0, 0.0]], s, np.random.default_rng(0))
    assert lq_old == pytest.approx(-math.log(2 * math.pi))
