import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewquant.tensor import (
    FockVector,
    SymTensor,
    apply_lift,
    basis_tensor,
    contract,
    fock_apply,
    lift_map,
    multiplicities,
    multisets,
    n_multisets,
    sym_power,
    symmetrize,
)

seeds = st.integers(0, 2**32 - 1)


def random_sym(rng, dim, degree, complex_=False):
    c = rng.standard_normal(n_multisets(dim, degree))
    if complex_:
        c = c + 1j * rng.standard_normal(c.shape)
    return SymTensor(degree, dim, c)


def random_fock(rng, dim, N):
    return FockVector(dim, tuple(random_sym(rng, dim, n) for n in range(N + 1)))


# -- storage ----------------------------------------------------------------------


@pytest.mark.parametrize("dim,degree", [(1, 0), (1, 5), (2, 3), (3, 4), (4, 2), (8, 3)])
def test_coefficient_count_is_multiset_count(dim, degree):
    assert n_multisets(dim, degree) == math.comb(dim + degree - 1, degree)
    assert multisets(dim, degree).shape == (math.comb(dim + degree - 1, degree), degree)


def test_degree_zero_is_a_scalar():
    s = SymTensor.scalar(2.5, 3)
    assert s.coeffs.shape == (1,)
    assert s.norm() == pytest.approx(2.5)


def test_multiplicities_sum_to_dim_power():
    assert multiplicities(3, 4).sum() == 3**4


# -- symmetrize ----------------------------------------------------------------------


def test_symmetrize_e1_e2_stores_one_on_the_pair():
    t = np.zeros((2, 2))
    t[0, 1] = 1.0
    s = symmetrize(t)
    # multisets of degree 2 over R^2: {0,0}, {0,1}, {1,1}
    np.testing.assert_array_equal(s.coeffs, [0.0, 1.0, 0.0])
    np.testing.assert_allclose(s.to_dense(), [[0.0, 0.5], [0.5, 0.0]])


def test_symmetrize_leaves_symmetric_tensor_unchanged():
    t = np.zeros((2, 2))
    t[0, 0] = 1.0
    np.testing.assert_allclose(symmetrize(t).to_dense(), t)


def test_symmetrize_degree_one_is_identity(rng):
    h = rng.standard_normal(4)
    np.testing.assert_allclose(symmetrize(h).coeffs, h)


def test_symmetrize_rejects_mismatched_axes():
    with pytest.raises(ValueError):
        symmetrize(np.zeros((2, 3)))


@given(seed=seeds, dim=st.integers(1, 4), degree=st.integers(1, 4))
def test_symmetrize_is_idempotent(seed, dim, degree):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((dim,) * degree)
    once = symmetrize(t)
    twice = symmetrize(once.to_dense())
    np.testing.assert_allclose(twice.coeffs, once.coeffs, atol=1e-12)


@given(seed=seeds, dim=st.integers(1, 4), degree=st.integers(1, 4))
def test_norm_matches_dense_euclidean_norm(seed, dim, degree):
    s = random_sym(np.random.default_rng(seed), dim, degree)
    assert s.norm() == pytest.approx(np.linalg.norm(s.to_dense()), rel=1e-12)


# -- symmetric powers -----------------------------------------------------------------


def test_sym_power_degree_zero_is_one():
    assert sym_power(np.array([3.0, -1.0]), 0).coeffs[0] == 1.0


def test_sym_power_of_basis_vector():
    s = sym_power(np.array([1.0, 0.0]), 3)
    expected = np.zeros(4)
    expected[0] = 1.0  # multiset {0,0,0}
    np.testing.assert_array_equal(s.coeffs, expected)


def test_sym_power_norm_of_ones():
    # |h|^4 with |h|^2 = 2
    assert sym_power(np.array([1.0, 1.0]), 2).norm() ** 2 == pytest.approx(4.0)


@given(seed=seeds, dim=st.integers(1, 4), n=st.integers(0, 5))
def test_inner_of_powers_is_power_of_inner(seed, dim, n):
    rng = np.random.default_rng(seed)
    g, h = rng.standard_normal(dim), rng.standard_normal(dim)
    assert sym_power(g, n).inner(sym_power(h, n)) == pytest.approx(float(g @ h) ** n, rel=1e-12, abs=1e-12)


def test_basis_tensor_norm_is_inverse_multiplicity():
    b = basis_tensor(3, (0, 1, 1))
    assert b.norm() ** 2 == pytest.approx(1.0 / 3.0)


def test_contract_against_rank_one(rng):
    g, h = rng.standard_normal(3), rng.standard_normal(3)
    assert contract(sym_power(g, 3), [h, h, h]) == pytest.approx(float(g @ h) ** 3)


def test_complex_inner_is_conjugate_linear(rng):
    s = random_sym(rng, 2, 2, complex_=True)
    t = random_sym(rng, 2, 2, complex_=True)
    assert (s * 1j).inner(t) == pytest.approx(-1j * s.inner(t))


# -- lifts and Fock space --------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 3, 5])
def test_lift_of_identity_is_identity(n):
    L = lift_map(np.eye(3), n)
    np.testing.assert_allclose(L, np.eye(n_multisets(3, n)))


@pytest.mark.parametrize("n", [0, 1, 4])
def test_lift_of_scalar_multiplies_by_power(n):
    L = lift_map(np.array([[0.7]]), n)
    np.testing.assert_allclose(L, [[0.7**n]])


@given(seed=seeds, d1=st.integers(1, 4), d2=st.integers(1, 4), n=st.integers(0, 4))
def test_lift_maps_powers_to_powers(seed, d1, d2, n):
    rng = np.random.default_rng(seed)
    A, h = rng.standard_normal((d2, d1)), rng.standard_normal(d1)
    np.testing.assert_allclose(apply_lift(A, sym_power(h, n)).coeffs, sym_power(A @ h, n).coeffs, atol=1e-11)


@given(seed=seeds, dim=st.integers(1, 3), N=st.integers(0, 4))
def test_fock_apply_is_functorial(seed, dim, N):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((dim, dim)), rng.standard_normal((dim, dim))
    v = random_fock(rng, dim, N)
    lhs = fock_apply(A @ B, v)
    rhs = fock_apply(A, fock_apply(B, v))
    assert (lhs - rhs).norm() <= 1e-12 * max(1.0, lhs.norm())


@given(seed=seeds, dim=st.integers(1, 3), N=st.integers(0, 4))
def test_contractions_lift_to_contractions(seed, dim, N):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim))
    A /= max(1.0, np.linalg.norm(A, 2))
    v = random_fock(rng, dim, N)
    assert fock_apply(A, v).norm() <= v.norm() * (1 + 1e-12)


def test_fock_apply_preserves_vacuum(rng):
    v = FockVector.vacuum(2, 3)
    w = fock_apply(rng.standard_normal((2, 2)), v)
    assert w[0].coeffs[0] == 1.0 and all(w[n].norm() == 0 for n in (1, 2, 3))


def test_fock_apply_zero_map_keeps_only_degree_zero(rng):
    v = random_fock(rng, 2, 3)
    w = fock_apply(np.zeros((2, 2)), v)
    assert w[0].coeffs[0] == v[0].coeffs[0]
    assert all(w[n].norm() == 0 for n in (1, 2, 3))


def test_fock_apply_half_scales_degree_two_by_quarter():
    v = FockVector(1, (SymTensor.scalar(0.0, 1), SymTensor.zeros(1, 1), sym_power(np.array([1.0]), 2)))
    w = fock_apply(np.array([[0.5]]), v)
    assert w[2].coeffs[0] == pytest.approx(0.25)


def test_fock_norm_sums_components(rng):
    v = random_fock(rng, 2, 3)
    assert v.norm() ** 2 == pytest.approx(sum(v[n].norm() ** 2 for n in range(4)))


def test_fock_component_degree_mismatch_rejected():
    with pytest.raises(ValueError):
        FockVector(2, (SymTensor.zeros(2, 1),))


def test_fock_json_dump_is_keyed_by_degree_and_multiset():
    v = FockVector(2, (SymTensor.scalar(1.0, 2), SymTensor(1, 2, np.array([0.5, 1j]))))
    d = v.to_json_dict()
    assert d == {"0": {"": 1.0}, "1": {"0": [0.5, 0.0], "1": [0.0, 1.0]}}
