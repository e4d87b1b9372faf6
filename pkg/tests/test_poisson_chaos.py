import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewquant.measures import AtomicLevyMeasure, CompoundPoissonLaw, PointConfiguration
from skewquant.mehler import TrigPolynomial, exp_martingale
from skewquant.poisson_chaos import (
    AtomSetMismatch,
    CountPolynomial,
    Pullback,
    SymFnTensor,
    charlier_table,
    chaos_norms,
    contract_kernel,
    count_of,
    difference_operator,
    kernels_to_json,
    last_penrose_all,
    last_penrose_l2_residual,
    last_penrose_reconstruct,
    last_penrose_tau,
    linear_statistic,
    poisson_chaos_inner,
    poisson_multiple_integral,
    product_formula_residual,
    verify_poisson_diagram,
    verify_tilde_intertwine,
)
from skewquant.random_models import random_jump_triple
from skewquant.skew import AtomMismatch, build_skew_factor_jump
from skewquant.tensor import multisets

seeds = st.integers(0, 2**32 - 1)
LEVY = AtomicLevyMeasure([[1.0], [2.0], [-0.5]], [0.4, 0.3, 0.2])


def random_kernel(rng, levy, n):
    return SymFnTensor(n, levy, rng.standard_normal(multisets(len(levy), n).shape[0]))


def jump_triple():
    mu1 = CompoundPoissonLaw([0.1], AtomicLevyMeasure([[2.0], [0.5]], [0.4, 0.3]))
    mu2 = CompoundPoissonLaw([0.0], AtomicLevyMeasure([[2.0], [0.5], [-1.0]], [0.5, 0.3, 0.2]))
    return build_skew_factor_jump([[1.0]], mu1, mu2)


# -- difference operators --------------------------------------------------------------------


def test_difference_of_counts():
    B = [0, 2]
    eta = np.array([2, 1, 3])
    f = count_of(LEVY, B)
    assert difference_operator(f, eta, [0]) == 1 and difference_operator(f, eta, [1]) == 0
    assert difference_operator(f, eta, [0, 2]) == 0
    sq = count_of(LEVY, B, power=2)
    for y in range(3):
        ind = 1.0 if y in B else 0.0
        assert difference_operator(sq, eta, [y]) == 2 * 5 * ind + ind
    for y1, y2 in itertools.product(range(3), repeat=2):
        assert difference_operator(sq, eta, [y1, y2]) == 2 * (y1 in B) * (y2 in B)


@given(seed=seeds)
def test_difference_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    terms = {tuple(rng.integers(0, 3, 3)): rng.standard_normal() for _ in range(4)}
    f = CountPolynomial(LEVY, terms)
    eta = rng.integers(0, 4, 3)
    ys = list(rng.integers(0, 3, 3))
    vals = [difference_operator(f, eta, list(p)) for p in itertools.permutations(ys)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12, atol=1e-12)
    g = count_of(LEVY, [0, 1], power=3)
    ivals = [difference_operator(g, eta, list(p)) for p in itertools.permutations(ys)]
    assert len(set(ivals)) == 1


def test_point_configuration_argument():
    eta = PointConfiguration(LEVY, [1, 0, 0])
    assert difference_operator(count_of(LEVY, [0], power=2), eta, [0]) == 3


# -- Last-Penrose map --------------------------------------------------------------------


def test_tau_of_single_count():
    taus = last_penrose_all(count_of(LEVY, [0]), LEVY, 3)
    assert taus[0].values[0] == pytest.approx(0.4)
    np.testing.assert_allclose(taus[1].values, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(taus[2].values, 0.0, atol=1e-13)
    np.testing.assert_allclose(taus[3].values, 0.0, atol=1e-13)


def test_tau_of_constant():
    taus = last_penrose_all(CountPolynomial(LEVY, {(0, 0, 0): 2.5}), LEVY, 2)
    assert taus[0].values[0] == pytest.approx(2.5)
    assert np.all(taus[1].values == 0) and np.allclose(taus[2].values, 0)


def test_tau_of_K_pullback_is_product():
    law = CompoundPoissonLaw([0.2], LEVY)
    xs = np.array([0.7])
    taus = last_penrose_all(Pullback(law, exp_martingale(law, xs)), LEVY, 3)
    e = np.exp(1j * LEVY.atoms[:, 0] * xs[0]) - 1.0
    for n in range(4):
        want = np.prod(e[multisets(3, n)], axis=1) if n else np.array([1.0])
        np.testing.assert_allclose(taus[n].values, want, atol=1e-12)


def test_tau_single_order_matches_all():
    f = count_of(LEVY, [0, 1], power=2)
    np.testing.assert_allclose(last_penrose_tau(f, LEVY, 2).values, last_penrose_all(f, LEVY, 2)[2].values)


def test_kernel_json_dump():
    taus = last_penrose_all(count_of(LEVY, [0]), LEVY, 1)
    dump = kernels_to_json(taus)
    assert dump["0"] == {"": pytest.approx(0.4)}
    assert dump["1"] == {"0": pytest.approx(1.0), "1": pytest.approx(0.0), "2": pytest.approx(0.0)}


# -- multiple integrals ---------------------------------------------------------------------


def test_charlier_orthogonality():
    from scipy.stats import poisson

    k = np.arange(80)
    p = poisson.pmf(k, 1.7)
    C = charlier_table(5, k, 1.7)
    G = (C * p) @ C.T
    np.testing.assert_allclose(G, np.diag([math.factorial(n) * 1.7**n for n in range(6)]), rtol=1e-10, atol=1e-10)


def test_first_order_integral_is_compensated_count():
    t = SymFnTensor(1, LEVY, [1.0, 0.0, 0.0])
    eta = np.array([[3, 1, 0], [0, 0, 2]])
    np.testing.assert_allclose(poisson_multiple_integral(t, eta), [3 - 0.4, -0.4])
    assert poisson_multiple_integral(SymFnTensor(0, LEVY, [2.5]), eta[0]) == 2.5


def test_second_order_isometry_two_atoms(rng):
    levy = AtomicLevyMeasure([[1.0], [3.0]], [0.7, 0.4])
    t = random_kernel(rng, levy, 2)
    assert poisson_chaos_inner(t, t) == pytest.approx(2 * t.norm() ** 2, abs=1e-10)


def test_isometry_and_orthogonality(rng):
    for n, m in itertools.product(range(4), repeat=2):
        s, t = random_kernel(rng, LEVY, n), random_kernel(rng, LEVY, m)
        want = math.factorial(n) * s.inner(t) if n == m else 0.0
        assert abs(poisson_chaos_inner(s, t) - want) <= 1e-9


def test_atom_set_mismatch():
    other = AtomicLevyMeasure([[1.0]], [1.0])
    t = SymFnTensor(1, LEVY, [1.0, 0.0, 0.0])
    with pytest.raises(AtomSetMismatch):
        poisson_multiple_integral(t, PointConfiguration(other, [1]))
    with pytest.raises(AtomSetMismatch):
        poisson_multiple_integral(t, np.array([1, 2]))
    with pytest.raises(AtomSetMismatch):
        t - SymFnTensor(1, other, [1.0])


# -- reconstruction -------------------------------------------------------------------------


def test_reconstruct_finite_chaos(rng):
    assert last_penrose_l2_residual(CountPolynomial(LEVY, {(0, 0, 0): 3.0}), LEVY, 0) <= 1e-12
    assert last_penrose_l2_residual(linear_statistic(LEVY, [1.0, -2.0, 0.5]), LEVY, 1) <= 1e-10
    sq = count_of(LEVY, [0, 2], power=2)
    assert last_penrose_l2_residual(sq, LEVY, 2) <= 1e-10
    eta = rng.integers(0, 5, (4, 3))
    np.testing.assert_allclose(last_penrose_reconstruct(sq, LEVY, 2, eta), sq(eta), atol=1e-10)


def test_chaos_norms_equal_on_finite_chaos():
    f = count_of(LEVY, [0, 1], power=3)
    lhs, rhs = chaos_norms(f, LEVY, 3)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_reconstruct_K_pullback():
    levy = AtomicLevyMeasure([[1.0], [-0.7]], [0.3, 0.2])
    law = CompoundPoissonLaw([0.0], levy)
    f = Pullback(law, exp_martingale(law, [0.8]))
    assert last_penrose_l2_residual(f, levy, 6) <= 1e-3


@pytest.mark.parametrize("N", [2, 4, 6])
def test_K_pullback_residual_equals_chaos_tail(N):
    # ||tau^n K||^2 = a^n with a = int |e^{i<y,x*>} - 1|^2 dnu, so the residual is the exp tail
    levy = AtomicLevyMeasure([[1.0], [-0.7]], [0.5, 0.3])
    law = CompoundPoissonLaw([0.0], levy)
    f = Pullback(law, exp_martingale(law, [1.1]))
    a = float(levy.weights @ np.abs(np.exp(1.1j * levy.atoms[:, 0]) - 1) ** 2)
    tail = math.sqrt(sum(a**n / math.factorial(n) for n in range(N + 1, 80)))
    assert last_penrose_l2_residual(f, levy, N) == pytest.approx(tail, rel=1e-8)


# -- ambient difference operators and the diagram ------------------------------------------------


def test_product_formula(rng):
    law = CompoundPoissonLaw([0.3, -0.1], AtomicLevyMeasure([[1.0, 0.5], [-0.2, 0.8]], [0.6, 0.4]))
    for n in range(4):
        assert product_formula_residual(law, rng.standard_normal(2), rng.standard_normal((n, 2))) <= 1e-10


def test_intertwine_examples(rng):
    tr = jump_triple()
    f = exp_martingale(tr.mu2, [0.8])
    assert verify_tilde_intertwine(tr, f, np.zeros((0, 1))) <= 1e-10
    ys = np.array([[2.0], [0.5]])
    assert verify_tilde_intertwine(tr, f, ys) <= 1e-10
    zero = build_skew_factor_jump([[0.0]], tr.mu1, tr.mu2)
    assert verify_tilde_intertwine(zero, f, ys) <= 1e-10


@given(seed=seeds, n=st.integers(0, 3))
def test_intertwine_random_trig(seed, n):
    rng = np.random.default_rng(seed)
    tr = random_jump_triple(rng)
    f = TrigPolynomial.random(tr.mu2.dim, 3, rng)
    assert verify_tilde_intertwine(tr, f, rng.standard_normal((n, tr.mu1.dim))) <= 1e-9


def test_contract_kernel_identity_and_scalar(rng):
    t = random_kernel(rng, LEVY, 2)
    np.testing.assert_allclose(contract_kernel(t, np.eye(1), LEVY).values, t.values)
    s = SymFnTensor(0, LEVY, [1.7])
    assert contract_kernel(s, [[5.0]], AtomicLevyMeasure([[9.0]], [1.0])).values[0] == 1.7


def test_contract_kernel_mismatch():
    with pytest.raises(AtomMismatch):
        contract_kernel(SymFnTensor(1, LEVY, [1.0, 0.0, 0.0]), [[3.0]], LEVY)


@given(seed=seeds, n=st.integers(0, 3))
def test_contract_kernel_is_contraction(seed, n):
    rng = np.random.default_rng(seed)
    tr = random_jump_triple(rng)
    t = random_kernel(rng, tr.mu2.levy, n)
    assert contract_kernel(t, tr.T, tr.mu1.levy).norm() <= t.norm() + 1e-12


def test_diagram_examples():
    tr = jump_triple()
    one = TrigPolynomial([1.0], [[0.0]])
    assert float(verify_poisson_diagram(tr, one, 3)) <= 1e-14
    res = verify_poisson_diagram(tr, exp_martingale(tr.mu2, [0.9]), 4)
    assert res.residual <= 1e-9 and len(res.per_order) == 5


@given(seed=seeds)
def test_diagram_random_trig(seed):
    rng = np.random.default_rng(seed)
    tr = random_jump_triple(rng)
    f = TrigPolynomial.random(tr.mu2.dim, 3, rng)
    assert verify_poisson_diagram(tr, f, 3).residual <= 1e-8
