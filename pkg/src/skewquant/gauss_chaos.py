"""Wiener-Ito chaos for a centered Gaussian law on R^d.

H is identified with R^r through the factor ``j`` of the law, so the
standard basis ``e_k`` of R^r is orthonormal in H and ``phi_{e_k}(j z) = z_k``.
Multiple integrals use the normalised symmetric basis of ``tensor``:

    I_n(sym(e_alpha)) = prod_k He_{alpha_k}(phi_{e_k}),

which gives ``I_n(h^{x n}) = He_n(phi_h)`` for unit ``h`` and
``E[I_n(s) I_m(t)] = delta_{nm} n! <s, t>``.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .measures import GaussianLaw
from .mehler import TestFunction, mehler_apply
from .skew import SkewTriple
from .tensor import (
    FockVector,
    SymTensor,
    exponents,
    lift_map,
    multiplicities,
    multisets,
    n_multisets,
)


class InconsistentDirection(ValueError):
    pass


# -- Hermite polynomials --------------------------------------------------------------


def hermite(n: int, x):
    """Probabilists' Hermite polynomial ``He_n(x)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return hermite_table(n, x)[n]


def hermite_table(N: int, x) -> np.ndarray:
    """``He_0(x), ..., He_N(x)`` stacked along a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((N + 1,) + x.shape)
    out[0] = 1.0
    if N >= 1:
        out[1] = x
    for n in range(1, N):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


# -- phi_h -----------------------------------------------------------------------------


def functional_for(h, law: GaussianLaw) -> np.ndarray:
    """A functional ``x*`` with ``j^T x* = h`` (least squares)."""
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != law.rank:
        raise InconsistentDirection(f"h has {h.shape[0]} coordinates but H has dimension {law.rank}")
    xstar, *_ = np.linalg.lstsq(law.factor.T, h, rcond=None)
    if np.max(np.abs(law.factor.T @ xstar - h), initial=0.0) > 1e-10:
        raise InconsistentDirection("h is not in the range of j^T")
    return xstar


def phi(h, x, law: GaussianLaw):
    """``phi_h(x) = <x, x*>`` for ``h = j^T x*``."""
    return np.asarray(x, dtype=float) @ functional_for(h, law)


# -- outer functions -------------------------------------------------------------------


class PolynomialOuter:
    """Polynomial ``g(u) = sum_a c_a u^a`` on R^k."""

    def __init__(self, terms: dict, k: int):
        self.k = k
        self.terms = {tuple(int(i) for i in a): c for a, c in terms.items() if c != 0}

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1], dtype=complex if self._complex else float)
        for a, c in self.terms.items():
            out = out + c * np.prod(u ** np.array(a), axis=-1)
        return out

    @property
    def _complex(self) -> bool:
        return any(isinstance(c, complex) or np.iscomplexobj(c) for c in self.terms.values())

    def derivative(self, alpha: Sequence[int]) -> "PolynomialOuter":
        terms = {}
        for a, c in self.terms.items():
            if any(ai < di for ai, di in zip(a, alpha)):
                continue
            factor = 1
            for ai, di in zip(a, alpha):
                factor *= math.perm(ai, di)
            b = tuple(ai - di for ai, di in zip(a, alpha))
            terms[b] = terms.get(b, 0) + c * factor
        return PolynomialOuter(terms, self.k)

    def expected_partials(self, alphas: np.ndarray, nodes: int | None = None) -> np.ndarray:
        """``E d^alpha g(Z)`` for ``Z ~ N(0, I_k)`` and each exponent row of ``alphas``."""
        nodes = self.degree // 2 + 1 if nodes is None else nodes
        z, w = quadrature.normal_grid(self.k, nodes)
        return np.array([w @ self.derivative(a)(z) for a in alphas])


class ExpAffineOuter:
    """``g(u) = sum_l c_l exp(<a_l, u> + b_l)`` with complex ``a_l``, ``b_l``."""

    def __init__(self, coeffs, slopes, intercepts):
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=complex))
        self.intercepts = np.asarray(intercepts, dtype=complex).reshape(-1)
        self.k = self.slopes.shape[1]

    degree = None

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(u @ self.slopes.T + self.intercepts) @ self.coeffs

    def derivative(self, alpha: Sequence[int]) -> "ExpAffineOuter":
        factor = np.prod(self.slopes ** np.asarray(alpha), axis=1)
        return ExpAffineOuter(self.coeffs * factor, self.slopes, self.intercepts)

    def expected_partials(self, alphas: np.ndarray, nodes: int | None = None) -> np.ndarray:
        nodes = quadrature.DEFAULT_NODES if nodes is None else nodes
        z, w = quadrature.normal_grid(self.k, nodes)
        # E exp(<a_l, Z> + b_l) once per term; partials only rescale the terms
        base = w @ np.exp(z @ self.slopes.T + self.intercepts)
        factors = np.prod(self.slopes[None, :, :] ** alphas[:, None, :], axis=2)
        return factors @ (self.coeffs * base)


# -- cylindrical functions -----------------------------------------------------------


class CylindricalFunction(TestFunction):
    """``f = g(phi_{h_1}, ..., phi_{h_k})`` with orthonormal ``h_i`` in H."""

    kind = "cylindrical"

    def __init__(self, law: GaussianLaw, directions, outer):
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if directions.shape[1] != law.rank:
            raise InconsistentDirection(
                f"directions have {directions.shape[1]} coordinates, H has dimension {law.rank}"
            )
        gram = directions @ directions.T
        if np.max(np.abs(gram - np.eye(directions.shape[0])), initial=0.0) > 1e-12:
            raise ValueError("directions must be orthonormal in H")
        if outer.k != directions.shape[0]:
            raise ValueError(f"outer function takes {outer.k} arguments, {directions.shape[0]} directions given")
        super().__init__(law.dim)
        self.law = law
        self.directions = directions
        self.outer = outer
        # phi_{h_i}(x) = <x, x*_i>
        self._functionals = np.array([functional_for(h, law) for h in directions]).reshape(-1, law.dim)

    @property
    def degree(self):
        return self.outer.degree

    def features(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self._functionals.T

    def __call__(self, x):
        return self.outer(self.features(x))

    def expect_shifted(self, base, offsets, weights):
        if isinstance(self.outer, ExpAffineOuter):
            o = self.outer
            v = self._functionals.T @ o.slopes.T  # (d, L)
            inner = np.exp(offsets @ v).T @ weights
            return np.exp(base @ v + o.intercepts) @ (o.coeffs * inner)
        return super().expect_shifted(base, offsets, weights)

    def suggested_nodes(self, scale: float) -> int:
        if self.degree is not None:
            return self.degree // 2 + 1
        return quadrature.DEFAULT_NODES


def exp_vector(law: GaussianLaw, h) -> CylindricalFunction:
    """``e_h = exp(phi_h - |h|^2 / 2)``."""
    h = np.asarray(h, dtype=float).reshape(-1)
    nh = float(np.linalg.norm(h))
    if nh == 0:
        return constant(law, 1.0)
    outer = ExpAffineOuter([1.0], [[nh]], [-0.5 * nh * nh])
    return CylindricalFunction(law, (h / nh)[None, :], outer)


def k_vector(law: GaussianLaw, xstar) -> CylindricalFunction:
    """``K_{mu,x*} = exp(i phi_h + |h|^2 / 2)`` with ``h = j^T x*``, as a cylindrical function."""
    h = law.factor.T @ np.asarray(xstar, dtype=float).reshape(-1)
    nh = float(np.linalg.norm(h))
    if nh == 0:
        return constant(law, 1.0)
    outer = ExpAffineOuter([1.0], [[1j * nh]], [0.5 * nh * nh])
    return CylindricalFunction(law, (h / nh)[None, :], outer)


def constant(law: GaussianLaw, c) -> CylindricalFunction:
    e = np.zeros((1, law.rank))
    if law.rank:
        e[0, 0] = 1.0
        return CylindricalFunction(law, e, PolynomialOuter({(0,): c}, 1))
    raise ValueError("constant functions need a law of positive rank")


def coordinate_polynomial(law: GaussianLaw, terms: dict) -> CylindricalFunction:
    """Polynomial in the H-coordinates ``phi_{e_1}, ..., phi_{e_r}``."""
    return CylindricalFunction(law, np.eye(law.rank), PolynomialOuter(terms, law.rank))


def random_polynomial(law: GaussianLaw, degree: int, rng: np.random.Generator) -> CylindricalFunction:
    r = law.rank
    terms = {}
    for a in map(tuple, _all_exponents(r, degree)):
        terms[a] = rng.standard_normal()
    return coordinate_polynomial(law, terms)


def _all_exponents(k: int, degree: int) -> np.ndarray:
    return np.concatenate([exponents(k, n) for n in range(degree + 1)], axis=0)


# -- Malliavin derivatives and Stroock coefficients --------------------------------------


def _lift_from_directions(f: CylindricalFunction, n: int, coeffs_k: np.ndarray) -> np.ndarray:
    # coefficients over R^k -> over H = R^r via h_i = directions[i]
    return lift_map(f.directions.T, n) @ coeffs_k


def malliavin_derivative(f: CylindricalFunction, n: int) -> Callable[[np.ndarray], SymTensor]:
    """``x -> D^n f(x)`` as a symmetric tensor over H."""
    k = f.outer.k
    alphas = exponents(k, n)
    mult = multiplicities(k, n)
    partials = [f.outer.derivative(a) for a in alphas]

    def Dn(x) -> SymTensor:
        u = f.features(np.asarray(x, dtype=float).reshape(1, -1))
        ck = mult * np.array([p(u)[0] for p in partials])
        return SymTensor(n, f.law.rank, _lift_from_directions(f, n, ck))

    return Dn


def stroock_coefficients(f: CylindricalFunction, N: int, nodes: int | None = None) -> FockVector:
    """``(E D^n f)_{n <= N}`` via Gaussian expectations of the partials of the outer function."""
    k = f.outer.k
    comps = []
    for n in range(N + 1):
        alphas = exponents(k, n)
        ck = multiplicities(k, n) * f.outer.expected_partials(alphas, nodes)
        coeffs = _lift_from_directions(f, n, ck)
        comps.append(SymTensor(n, f.law.rank, _real_if_close(coeffs)))
    return FockVector(f.law.rank, tuple(comps))


def projection_coefficients(F: Callable, law: GaussianLaw, N: int, nodes: int = quadrature.DEFAULT_NODES) -> FockVector:
    """``(E D^n F)_{n <= N}`` for any function ``F`` on the support, by integration by parts.

    Uses ``E d^alpha G(Z) = E[G(Z) He_alpha(Z)]`` with ``G(z) = F(j z)``, so only
    values of ``F`` on a Gauss-Hermite grid are needed.
    """
    r = law.rank
    if r > quadrature.MAX_GRID_DIM:
        raise ValueError(f"H has dimension {r}; projection quadrature is capped at {quadrature.MAX_GRID_DIM}")
    z, w = quadrature.normal_grid(r, nodes)
    vals = np.asarray(F(z @ law.factor.T))
    he = hermite_table(N, z)  # (N+1, points, r)
    comps = []
    for n in range(N + 1):
        ex = exponents(r, n)
        basis = np.ones((ex.shape[0], z.shape[0]))
        for kk in range(r):
            basis *= he[ex[:, kk], :, kk]
        coeffs = multiplicities(r, n) * (basis @ (w * vals))
        comps.append(SymTensor(n, r, _real_if_close(coeffs)))
    return FockVector(r, tuple(comps))


def _real_if_close(c: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(c) and np.max(np.abs(c.imag), initial=0.0) <= 1e-15 * max(1.0, np.max(np.abs(c), initial=0.0)):
        return c.real.copy()
    return c


# -- multiple integrals ----------------------------------------------------------------


def multiple_integral(t: SymTensor, law: GaussianLaw, x) -> np.ndarray:
    """``I_n(t)`` evaluated at point(s) ``x`` of the support."""
    if t.dim != law.rank:
        raise ValueError(f"tensor over R^{t.dim} but H has dimension {law.rank}")
    z = law.coordinates(x)
    return _integral_from_coords(t, z)


def _integral_from_coords(t: SymTensor, z: np.ndarray) -> np.ndarray:
    z = np.atleast_1d(z)
    he = hermite_table(t.degree, z)  # (n+1, ..., r)
    ex = exponents(t.dim, t.degree)
    basis = np.ones(z.shape[:-1] + (ex.shape[0],))
    for kk in range(t.dim):
        basis = basis * np.moveaxis(he[ex[:, kk], ..., kk], 0, -1)
    return basis @ t.coeffs


def stroock_reconstruct(source, law: GaussianLaw, N: int, x, nodes: int | None = None) -> np.ndarray:
    """``sum_{n <= N} I_n(E D^n f) / n!`` at ``x``; ``source`` is a cylindrical function or a FockVector."""
    coeffs = source if isinstance(source, FockVector) else stroock_coefficients(source, N, nodes)
    z = law.coordinates(np.asarray(x, dtype=float))
    total = 0
    for n in range(min(N, coeffs.truncation) + 1):
        total = total + _integral_from_coords(coeffs[n], z) / math.factorial(n)
    return total


def stroock_l2_residual(f: CylindricalFunction, N: int, nodes: int = quadrature.DEFAULT_NODES) -> float:
    """``|| f - sum_{n<=N} I_n(E D^n f)/n! ||_{L^2(mu)}`` by quadrature over H."""
    law = f.law
    z, w = quadrature.normal_grid(law.rank, nodes)
    x = z @ law.factor.T
    diff = f(x) - stroock_reconstruct(f, law, N, x)
    return float(np.sqrt(w @ np.abs(diff) ** 2))


# -- commuting diagram ------------------------------------------------------------------


def rkhs_matrix(triple: SkewTriple) -> np.ndarray:
    """``M`` with ``j2 M = T j1`` (the restriction ``T|_{H1}``)."""
    return np.linalg.pinv(triple.mu2.factor) @ triple.T @ triple.mu1.factor


def _outer_nodes(f: TestFunction, N: int, r: int) -> int:
    deg = getattr(f, "degree", None)
    if deg is not None:
        return (deg + N) // 2 + 1
    return {0: 1, 1: 60, 2: 40, 3: 24}.get(r, 16)


def transported_coefficients(triple: SkewTriple, f: CylindricalFunction, N: int) -> FockVector:
    """``Gamma(T*)`` applied to the Stroock coefficients of ``f``."""
    M = rkhs_matrix(triple)
    cf = stroock_coefficients(f, N)
    comps = [SymTensor(n, triple.mu1.rank, lift_map(M.T, n) @ cf[n].coeffs) for n in range(N + 1)]
    return FockVector(triple.mu1.rank, tuple(comps))


def mehler_coefficients(triple: SkewTriple, f: TestFunction, N: int, nodes: int | None = None) -> FockVector:
    """Stroock coefficients of ``P_T f`` on the ``mu1`` side, from values of ``P_T f`` by quadrature."""
    outer = _outer_nodes(f, N, triple.mu1.rank) if nodes is None else nodes
    return projection_coefficients(lambda x: mehler_apply(triple, f, x), triple.mu1, N, outer)


def verify_derivative_intertwine(triple: SkewTriple, f: CylindricalFunction, directions, nodes: int | None = None) -> float:
    """``|E_{mu1} D^n_{h_1..h_n} P_T f - E_{mu2} D^n_{M h_1..M h_n} f|`` with ``n = len(directions)``."""
    directions = np.asarray(directions, dtype=float).reshape(-1, triple.mu1.rank)
    n = directions.shape[0]
    M = rkhs_matrix(triple)
    lhs_t = mehler_coefficients(triple, f, n, nodes)[n]
    rhs_t = stroock_coefficients(f, n)[n]
    lhs = _contract(lhs_t, directions)
    rhs = _contract(rhs_t, directions @ M.T)
    return float(abs(lhs - rhs))


def _contract(t: SymTensor, vectors: np.ndarray):
    if t.degree == 0:
        return t.coeffs[0]
    # <t, v_1 x ... x v_n> = sum_alpha c_alpha perm(V[:, alpha]) / n!
    from itertools import permutations

    ms = multisets(t.dim, t.degree)
    total = 0
    for c, alpha in zip(t.coeffs, ms):
        if c == 0:
            continue
        perm = sum(np.prod([vectors[i, alpha[s[i]]] for i in range(t.degree)]) for s in permutations(range(t.degree)))
        total += c * perm
    return total / math.factorial(t.degree)


def verify_gaussian_diagram(triple: SkewTriple, f: CylindricalFunction, N: int, probes, nodes: int | None = None):
    """Residuals of the Gaussian second-quantisation diagram.

    Returns ``(coefficient_residual, reconstruction_residual)``: the largest
    tensor-norm gap between the chaos coefficients of ``P_T f`` and
    ``Gamma(T*)`` applied to those of ``f``, and the largest gap at the probe
    points between ``P_T f`` and the chaos sum built from the transported
    coefficients.
    """
    transported = transported_coefficients(triple, f, N)
    direct = mehler_coefficients(triple, f, N, nodes)
    coef_res = max((direct[n] - transported[n]).norm() for n in range(N + 1))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    ptf = mehler_apply(triple, f, probes)
    recon = stroock_reconstruct(transported, triple.mu1, N, probes)
    return float(coef_res), float(np.max(np.abs(ptf - recon)))


def chaos_route_identity(triple: SkewTriple, xstar, N: int, probes) -> float:
    """Max gap between ``sum I_n(Gamma(T*) E D^n K_{mu2,x*})/n!`` and ``K_{mu1,T^T x*}`` at probes."""
    from .mehler import exp_martingale

    k2 = k_vector(triple.mu2, xstar)
    coeffs = transported_coefficients(triple, k2, N)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    chaos = stroock_reconstruct(coeffs, triple.mu1, N, probes)
    exact = exp_martingale(triple.mu1, triple.T.T @ np.asarray(xstar, dtype=float))(probes)
    return float(np.max(np.abs(chaos - exact)))


def chaos_inner_product(s: SymTensor, t: SymTensor, law: GaussianLaw, nodes: int | None = None) -> float:
    """``E_mu[I_n(s) I_m(t)]`` by Gauss-Hermite quadrature over H."""
    nodes = (s.degree + t.degree) // 2 + 1 if nodes is None else nodes
    z, w = quadrature.normal_grid(law.rank, nodes)
    return complex(w @ (np.conj(_integral_from_coords(s, z)) * _integral_from_coords(t, z))).real


__all__ = [
    "hermite",
    "hermite_table",
    "phi",
    "functional_for",
    "PolynomialOuter",
    "ExpAffineOuter",
    "CylindricalFunction",
    "exp_vector",
    "k_vector",
    "constant",
    "coordinate_polynomial",
    "random_polynomial",
    "malliavin_derivative",
    "stroock_coefficients",
    "projection_coefficients",
    "multiple_integral",
    "stroock_reconstruct",
    "stroock_l2_residual",
    "rkhs_matrix",
    "transported_coefficients",
    "mehler_coefficients",
    "verify_derivative_intertwine",
    "verify_gaussian_diagram",
    "chaos_route_identity",
    "chaos_inner_product",
    "InconsistentDirection",
    "n_multisets",
]
