import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewquant.measures import AtomicLevyMeasure, CompoundPoissonLaw, GaussianLaw, char_fn, dirac
from skewquant.ou import OUSystem, invariant_law, marginal_law
from skewquant.random_models import random_gaussian_pair, random_gaussian_triple, random_jump_triple
from skewquant.skew import (
    AtomMismatch,
    NotAContraction,
    NotASkewMap,
    build_skew_factor,
    build_skew_factor_jump,
    check_self_decomposable,
    extend_contraction,
    restrict_to_rkhs,
    skew_factor,
    skew_identity_residual,
    verify_semigroup_law,
)

seeds = st.integers(0, 2**32 - 1)
I2 = GaussianLaw(np.eye(2))


def atom_law(y, w):
    return CompoundPoissonLaw([0.0], AtomicLevyMeasure([[y]], [w]))


# -- Gaussian factor ---------------------------------------------------------------------


def test_zero_map_gives_target_law():
    Q2 = np.array([[2.0, 0.3], [0.3, 1.0]])
    tr = build_skew_factor(np.zeros((2, 2)), I2, GaussianLaw(Q2))
    np.testing.assert_allclose(tr.rho.cov, Q2)


def test_identity_gives_dirac():
    tr = build_skew_factor(np.eye(2), I2, I2)
    np.testing.assert_allclose(tr.residual, 0.0)
    assert tr.rho.rank == 0


def test_diagonal_residual():
    tr = build_skew_factor(np.diag([0.6, 0.8]), I2, I2)
    np.testing.assert_allclose(tr.residual, np.diag([0.64, 0.36]), atol=1e-15)
    assert tr.lambda_min == pytest.approx(0.36)
    assert skew_identity_residual(tr) <= 1e-12


def test_doubling_is_not_a_skew_map():
    with pytest.raises(NotASkewMap) as err:
        build_skew_factor(2 * np.eye(2), I2, I2)
    assert err.value.lambda_min == pytest.approx(-3.0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        build_skew_factor(np.eye(3), I2, I2)


def test_mixed_law_classes_rejected():
    with pytest.raises(TypeError):
        skew_factor([[1.0]], GaussianLaw([[1.0]]), atom_law(1.0, 1.0))


@given(seed=seeds)
def test_random_triples_satisfy_identity(seed):
    rng = np.random.default_rng(seed)
    tr = random_gaussian_triple(rng)
    assert skew_identity_residual(tr, rng=rng) <= 1e-10
    direct = np.linalg.eigvalsh(tr.mu2.cov - tr.T @ tr.mu1.cov @ tr.T.T)[0]
    assert abs(tr.lambda_min - direct) <= 1e-10


@given(seed=seeds)
def test_scaled_beyond_limit_is_rejected(seed):
    rng = np.random.default_rng(seed)
    T, mu1, mu2 = random_gaussian_pair(rng, 3, scale=1.2)
    with pytest.raises(NotASkewMap):
        build_skew_factor(T, mu1, mu2)


def test_report_contains_diagnostics():
    rep = build_skew_factor(np.diag([0.6, 0.8]), I2, I2).to_report()
    assert rep["kind"] == "gaussian" and rep["lambda_min_R"] == pytest.approx(0.36)


# -- jump factor ------------------------------------------------------------------------


def test_jump_identity_gives_shift_only():
    mu1 = CompoundPoissonLaw([0.3], AtomicLevyMeasure([[2.0]], [1.0]))
    mu2 = CompoundPoissonLaw([1.0], AtomicLevyMeasure([[2.0]], [1.0]))
    tr = build_skew_factor_jump([[1.0]], mu1, mu2)
    assert len(tr.rho.levy) == 0
    np.testing.assert_allclose(tr.rho.shift, [0.7])


def test_jump_weight_subtraction():
    tr = build_skew_factor_jump([[1.0]], atom_law(2.0, 1.0), atom_law(2.0, 1.5))
    np.testing.assert_allclose(tr.rho.levy.atoms, [[2.0]])
    np.testing.assert_allclose(tr.rho.levy.weights, [0.5])
    assert skew_identity_residual(tr) <= 1e-12


def test_jump_negative_weight():
    with pytest.raises(NotASkewMap):
        build_skew_factor_jump([[1.0]], atom_law(2.0, 1.0), atom_law(2.0, 0.5))


def test_jump_atom_mismatch():
    with pytest.raises(AtomMismatch):
        build_skew_factor_jump([[1.0]], atom_law(2.0, 1.0), atom_law(3.0, 1.0))


def test_jump_small_atoms_compensated_consistently():
    # atom 0.5 is compensated in mu1 but its image 1.5 is not
    mu1 = atom_law(0.5, 1.0)
    mu2 = CompoundPoissonLaw([0.2], AtomicLevyMeasure([[1.5], [0.3]], [1.4, 0.6]))
    tr = build_skew_factor_jump([[3.0]], mu1, mu2)
    assert skew_identity_residual(tr, scale=3.0) <= 1e-12


def test_jump_zero_image_goes_to_shift():
    mu1 = CompoundPoissonLaw([0.0, 0.0], AtomicLevyMeasure([[1.0, 0.0], [0.0, 2.0]], [0.5, 0.7]))
    mu2 = CompoundPoissonLaw([0.1], AtomicLevyMeasure([[2.0]], [1.0]))
    tr = build_skew_factor_jump([[0.0, 1.0]], mu1, mu2)
    assert skew_identity_residual(tr) <= 1e-12


@given(seed=seeds)
def test_random_jump_triples_satisfy_identity(seed):
    rng = np.random.default_rng(seed)
    tr = random_jump_triple(rng)
    assert np.all(tr.rho.levy.weights > 0)
    assert skew_identity_residual(tr, rng=rng, scale=2.0) <= 1e-10


# -- RKHS restriction and extension -------------------------------------------------------


def test_restrict_identity_and_diagonal():
    np.testing.assert_allclose(restrict_to_rkhs(np.eye(2), I2, I2), np.eye(2))
    M = restrict_to_rkhs(np.diag([0.6, 0.8]), I2, I2)
    np.testing.assert_allclose(M, np.diag([0.6, 0.8]), atol=1e-15)
    assert np.linalg.norm(M, 2) == pytest.approx(0.8)


def test_restrict_degenerate_source():
    M = restrict_to_rkhs(np.eye(2), GaussianLaw(np.diag([1.0, 0.0])), I2)
    np.testing.assert_allclose(M, [[1.0], [0.0]], atol=1e-15)


def test_extend_examples():
    one = GaussianLaw([[1.0]])
    tr = extend_contraction([[0.5]], one, one)
    np.testing.assert_allclose(tr.T @ one.cov @ tr.T.T, [[0.25]])
    np.testing.assert_allclose(tr.residual, [[0.75]])
    tr0 = extend_contraction(np.zeros((2, 2)), I2, GaussianLaw(np.diag([2.0, 3.0])))
    np.testing.assert_allclose(tr0.rho.cov, np.diag([2.0, 3.0]))
    np.testing.assert_allclose(extend_contraction(np.eye(2), I2, I2).residual, 0.0, atol=1e-15)


def test_extend_rejects_expansion():
    with pytest.raises(NotAContraction):
        extend_contraction([[1.0 + 1e-9]], GaussianLaw([[1.0]]), GaussianLaw([[1.0]]))


@given(seed=seeds)
def test_restriction_is_contraction_and_round_trips(seed):
    rng = np.random.default_rng(seed)
    tr = random_gaussian_triple(rng)
    M = restrict_to_rkhs(tr.T, tr.mu1, tr.mu2)
    assert np.linalg.norm(M, 2) <= 1 + 1e-9
    M2 = restrict_to_rkhs(extend_contraction(M, tr.mu1, tr.mu2).T, tr.mu1, tr.mu2)
    np.testing.assert_allclose(M2 @ M2.T, M @ M.T, atol=1e-10)


# -- self-decomposability and the semigroup law ------------------------------------------


def test_self_decomposable_scalar():
    one = GaussianLaw([[1.0]])
    np.testing.assert_allclose(check_self_decomposable([[0.0]], one).rho.cov, [[1.0]])
    np.testing.assert_allclose(check_self_decomposable([[0.6]], one).rho.cov, [[0.64]])
    with pytest.raises(NotASkewMap):
        check_self_decomposable([[1.1]], one)


def test_invariant_law_is_self_decomposable():
    sys = OUSystem(np.array([[-1.0, 0.5], [0.0, -0.3]]), GaussianLaw(np.eye(2)))
    tr = check_self_decomposable(sys.S(1.0), invariant_law(sys))
    assert tr.lambda_min >= -1e-9


def test_semigroup_law_trivial_and_negative_control():
    sys = OUSystem([[-0.7]], CompoundPoissonLaw([0.0], AtomicLevyMeasure([[1.0]], [1.0])))
    assert verify_semigroup_law(sys.S, lambda r: marginal_law(sys, r), 0.0, 0.5) <= 1e-12
    assert verify_semigroup_law(sys.S, lambda r: marginal_law(sys, r), 0.4, 0.5) <= 1e-8

    def perturbed(r):
        return dirac([0.3]) if r == 0.5 else marginal_law(sys, r)

    assert verify_semigroup_law(sys.S, perturbed, 0.4, 0.5, scale=2.0) > 0.01


def test_gaussian_semigroup_law():
    sys = OUSystem([[-1.0]], GaussianLaw([[2.0]]))
    mus = lambda r: GaussianLaw([[1.0 - np.exp(-2.0 * r)]])  # noqa: E731
    assert verify_semigroup_law(sys.S, mus, 0.3, 0.8) <= 1e-12
    assert char_fn(mus(0.0))(np.array([1.0])) == 1.0
