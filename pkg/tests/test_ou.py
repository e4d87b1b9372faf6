import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewquant.measures import AtomicLevyMeasure, CompoundPoissonLaw, GaussianLaw, char_fn, empirical_charfn
from skewquant.mehler import TrigPolynomial
from skewquant.ou import (
    NotStable,
    OUSystem,
    chapman_kolmogorov_residual,
    gaussian_marginal_cov,
    invariance_residual,
    invariant_fixed_point_residual,
    invariant_law,
    lyapunov_residual,
    marginal_law,
    mehler_semigroup,
    simulate_path,
    time_marginal_charfn,
    verify_skew_semigroup,
    write_path_csv,
)

seeds = st.integers(0, 2**32 - 1)


def scalar_gaussian():
    return OUSystem([[-1.0]], GaussianLaw([[2.0]]))


def jump_system():
    A = np.array([[-1.0, 0.3], [0.0, -0.5]])
    levy = AtomicLevyMeasure([[1.0, 0.0], [0.0, -0.7], [0.4, 0.4]], [0.5, 0.8, 1.2])
    return OUSystem(A, CompoundPoissonLaw([0.1, -0.2], levy))


def random_stable_gaussian(rng, d):
    A = rng.standard_normal((d, d)) - 2.0 * np.eye(d)
    A -= (max(np.linalg.eigvals(A).real) + 0.5) * np.eye(d) * (max(np.linalg.eigvals(A).real) > -0.5)
    G = rng.standard_normal((d, d))
    return OUSystem(A, GaussianLaw(G @ G.T))


@pytest.mark.parametrize("t", [0.0, 0.1, 1.0, 3.0])
def test_scalar_marginal_variance(t):
    Q = gaussian_marginal_cov(scalar_gaussian(), t)
    assert Q[0, 0] == pytest.approx(1.0 - np.exp(-2.0 * t), abs=1e-12)


def test_scalar_invariant_variance():
    law = invariant_law(scalar_gaussian())
    assert law.cov[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_marginal_cov_matches_quadrature(rng):
    sys = random_stable_gaussian(rng, 3)
    from scipy.integrate import quad_vec

    ref, _ = quad_vec(lambda u: sys.S(u) @ sys.driver.cov @ sys.S(u).T, 0.0, 1.3, epsabs=1e-13)
    np.testing.assert_allclose(gaussian_marginal_cov(sys, 1.3), ref, atol=1e-11)


def test_zero_eigenvalue_is_not_stable():
    sys = OUSystem(np.diag([-1.0, 0.0]), GaussianLaw(np.eye(2)))
    with pytest.raises(NotStable):
        invariant_law(sys)
    with pytest.raises(NotStable):
        invariant_law(OUSystem([[0.5]], GaussianLaw([[1.0]])))


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        OUSystem(np.eye(2), GaussianLaw([[1.0]]))


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        marginal_law(scalar_gaussian(), -1.0)


@given(seed=seeds, d=st.integers(1, 3))
def test_gaussian_semigroup_and_lyapunov(seed, d):
    rng = np.random.default_rng(seed)
    sys = random_stable_gaussian(rng, d)
    assert verify_skew_semigroup(sys, 0.4, 0.7, rng=rng) <= 1e-10
    Q = invariant_law(sys).cov
    assert lyapunov_residual(sys, Q) <= 1e-10 * max(1.0, np.abs(sys.driver.cov).max())
    assert invariant_fixed_point_residual(sys, 0.6, rng=rng) <= 1e-10


def test_jump_semigroup_and_invariant():
    sys = jump_system()
    assert verify_skew_semigroup(sys, 0.3, 0.9, rng=np.random.default_rng(1)) <= 1e-9
    assert invariant_fixed_point_residual(sys, 0.5, rng=np.random.default_rng(2)) <= 1e-9


def test_jump_marginal_at_zero_is_dirac():
    law = marginal_law(jump_system(), 0.0)
    assert char_fn(law)(np.array([1.0, 2.0])) == pytest.approx(1.0)


def test_jump_marginal_small_time_limit():
    # mu_t^ = exp(t zeta(u) + O(t^2))
    sys = jump_system()
    u = np.array([[0.7, -0.4]])
    t = 1e-4
    approx = np.exp(t * np.log(char_fn(sys.driver).fn(u)))
    np.testing.assert_allclose(char_fn(marginal_law(sys, t)).fn(u), approx, atol=1e-7)


def test_mehler_semigroup_closed_form():
    sys = scalar_gaussian()
    f = TrigPolynomial([1.0], [[1.0]])
    g = mehler_semigroup(sys, 1.0, f)
    x = np.array([[0.3]])
    expected = np.exp(1j * np.exp(-1.0) * 0.3) * np.exp(-0.5 * (1 - np.exp(-2.0)))
    np.testing.assert_allclose(g(x), expected, atol=1e-14)


@given(seed=seeds)
def test_chapman_kolmogorov_and_invariance(seed):
    rng = np.random.default_rng(seed)
    sys = random_stable_gaussian(rng, 2)
    f = TrigPolynomial(rng.standard_normal(3) + 1j * rng.standard_normal(3), rng.standard_normal((3, 2)))
    probes = rng.standard_normal((10, 2))
    assert chapman_kolmogorov_residual(sys, 0.3, 0.5, f, probes) <= 1e-10
    assert invariance_residual(sys, 0.8, f) <= 1e-10


def test_jump_chapman_kolmogorov(rng):
    sys = jump_system()
    f = TrigPolynomial([1.0, -0.5j], [[0.5, 0.1], [-0.3, 0.8]])
    assert chapman_kolmogorov_residual(sys, 0.2, 0.6, f, rng.standard_normal((5, 2))) <= 1e-9


def test_deterministic_path_without_noise(rng):
    sys = OUSystem(np.diag([-1.0, -2.0]), GaussianLaw(np.zeros((2, 2))))
    grid = np.linspace(0, 2, 11)
    path = simulate_path(sys, [1.0, 1.0], grid, rng)
    np.testing.assert_allclose(path[0], np.exp(np.outer(grid, [-1.0, -2.0])), atol=1e-14)


def test_path_grid_must_increase(rng):
    with pytest.raises(ValueError):
        simulate_path(scalar_gaussian(), [0.0], [0.0, 1.0, 1.0], rng)


@pytest.mark.parametrize("make", [scalar_gaussian, jump_system])
def test_path_time_marginal_matches_charfn(make):
    sys = make()
    rng = np.random.default_rng(17)
    y0 = np.full(sys.dim, 0.5)
    paths = simulate_path(sys, y0, [0.0, 0.4, 1.0], rng, n_paths=20000)
    u = np.random.default_rng(3).standard_normal((10, sys.dim))
    mean, se = empirical_charfn(paths[:, -1], u)
    z = np.abs(mean - time_marginal_charfn(sys, y0, 1.0)(u)) / se
    assert np.max(z) < 4


def test_write_path_csv(rng):
    grid = [0.0, 0.5]
    path = simulate_path(scalar_gaussian(), [1.0], grid, rng)
    buf = io.StringIO()
    write_path_csv(path, grid, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,y1" and lines[1] == "0.0,1.0" and len(lines) == 3
