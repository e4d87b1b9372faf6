"""Poisson chaos for a compound Poisson law with finitely many atoms.

A configuration ``eta`` of the Poisson random measure is a count vector
``(eta_1, ..., eta_m)`` on the atoms ``y_1, ..., y_m``; under ``P_Pi`` the
counts are independent Poisson(``w_j``).  Every expectation below is an
exact sum over a truncated count lattice (per-atom tail < 1e-14).

Kernels on ``Y^n`` are stored by their values on atom multisets.  Multiple
integrals use monic Charlier polynomials per atom,

    I_n(t)(eta) = sum_alpha t(alpha) * mult(alpha) * prod_j C_{k_j}(eta_j; w_j),

which gives ``I_1(1_{y_j}) = eta_j - w_j`` and ``E I_n(t)^2 = n! ||t||^2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb

from . import quadrature
from .measures import AtomicLevyMeasure, CompoundPoissonLaw, PointConfiguration
from .mehler import TestFunction, exp_martingale, mehler_apply
from .skew import SNAP_TOL, AtomMismatch, SkewTriple
from .tensor import exponents, multiplicities, multisets


# polynomial statistics grow with the counts, so exact sums cut far beyond 1e-14
EXACT_TAIL = 1e-22


class AtomSetMismatch(ValueError):
    pass


def _counts(eta) -> np.ndarray:
    if isinstance(eta, PointConfiguration):
        return eta.counts
    return np.asarray(eta, dtype=np.int64)


# -- functions of configurations ------------------------------------------------------------


class ConfigFunction:
    """Function of a configuration, vectorised over count arrays of shape ``(..., m)``."""

    tag = "bounded-callback"

    def __init__(self, levy: AtomicLevyMeasure):
        self.levy = levy

    def __call__(self, counts) -> np.ndarray:
        raise NotImplementedError


class CountPolynomial(ConfigFunction):
    """Polynomial in the counts, ``sum_a c_a prod_j eta_j^{a_j}``."""

    tag = "product-statistic"

    def __init__(self, levy: AtomicLevyMeasure, terms: dict):
        super().__init__(levy)
        self.terms = {tuple(int(i) for i in a): c for a, c in terms.items()}
        for a in self.terms:
            if len(a) != len(levy):
                raise ValueError(f"exponent {a} does not match {len(levy)} atoms")

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __call__(self, counts):
        n = np.asarray(_counts(counts), dtype=float)
        out = 0.0
        for a, c in self.terms.items():
            out = out + c * np.prod(n ** np.array(a, dtype=float), axis=-1)
        return np.broadcast_to(out, n.shape[:-1]) if np.ndim(out) == 0 else out


def linear_statistic(levy: AtomicLevyMeasure, g) -> CountPolynomial:
    """``eta -> int g d eta = sum_j g(y_j) eta_j``."""
    g = np.asarray(g).reshape(-1)
    terms = {}
    for j, gj in enumerate(g):
        if gj != 0:
            a = [0] * len(levy)
            a[j] = 1
            terms[tuple(a)] = gj
    return CountPolynomial(levy, terms)


def count_of(levy: AtomicLevyMeasure, mask, power: int = 1) -> CountPolynomial:
    """``eta -> eta(B)^power`` for the atom subset ``B``."""
    ind = np.zeros(len(levy))
    ind[np.asarray(mask)] = 1.0
    lin = linear_statistic(levy, ind)
    terms = {tuple([0] * len(levy)): 1.0}
    for _ in range(power):
        nxt = {}
        for a, c in terms.items():
            for b, d in lin.terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                nxt[key] = nxt.get(key, 0.0) + c * d
        terms = nxt
    return CountPolynomial(levy, terms)


class Pullback(ConfigFunction):
    """``j f(eta) = f(xi + int x eta_bar(dx))`` for a function ``f`` on the ambient space."""

    tag = "pullback"

    def __init__(self, law: CompoundPoissonLaw, f: Callable):
        super().__init__(law.levy)
        self.law = law
        self.f = f

    def points(self, counts) -> np.ndarray:
        return self.law.offset + np.asarray(_counts(counts), dtype=float) @ self.law.levy.atoms

    def __call__(self, counts):
        return np.asarray(self.f(self.points(counts)))


class ConfigCallback(ConfigFunction):
    def __init__(self, levy: AtomicLevyMeasure, fn: Callable):
        super().__init__(levy)
        self.fn = fn

    def __call__(self, counts):
        return np.asarray(self.fn(np.asarray(_counts(counts))))


def difference_operator(f: ConfigFunction, eta, atoms: Sequence[int]):
    """``D^n_{y_{a_1}, ..., y_{a_n}} f(eta)`` by inclusion-exclusion over subsets."""
    base = np.asarray(_counts(eta), dtype=np.int64)
    atoms = list(atoms)
    n = len(atoms)
    total = 0
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            c = base.copy()
            for i in S:
                c[atoms[i]] += 1
            total = total + (-1) ** (n - r) * f(c)
    return total


# -- kernels ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymFnTensor:
    """Symmetric function on ``Y^n`` given by its values on atom multisets."""

    degree: int
    levy: AtomicLevyMeasure
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        v = v.astype(complex if np.iscomplexobj(v) else float)
        m = len(self.levy)
        expected = multisets(m, self.degree).shape[0]
        if v.shape != (expected,):
            raise ValueError(f"expected {expected} multiset values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def multisets(self) -> np.ndarray:
        return multisets(len(self.levy), self.degree)

    def _mass(self) -> np.ndarray:
        m, n = len(self.levy), self.degree
        ex = exponents(m, n)
        return multiplicities(m, n) * np.prod(self.levy.weights ** ex, axis=1)

    def inner(self, other: "SymFnTensor"):
        """``int conj(s) t d nu^n``."""
        if other.levy is not self.levy or other.degree != self.degree:
            raise AtomSetMismatch("kernels live on different atom sets or degrees")
        val = np.sum(self._mass() * np.conj(self.values) * other.values)
        return complex(val) if np.iscomplexobj(val) else float(val)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self._mass() * np.abs(self.values) ** 2)))

    def __sub__(self, other: "SymFnTensor") -> "SymFnTensor":
        if other.levy is not self.levy or other.degree != self.degree:
            raise AtomSetMismatch("kernels live on different atom sets or degrees")
        return SymFnTensor(self.degree, self.levy, self.values - other.values)

    def to_json_dict(self) -> dict:
        out = {}
        for ms, v in zip(self.multisets, self.values):
            key = ",".join(str(int(i)) for i in ms)
            out[key] = [float(v.real), float(v.imag)] if np.iscomplexobj(v) else float(v)
        return out


def kernels_to_json(kernels: Sequence[SymFnTensor]) -> dict:
    return {str(t.degree): t.to_json_dict() for t in kernels}


# -- Last-Penrose map ------------------------------------------------------------------


def _shifted_expectations(f: ConfigFunction, levy: AtomicLevyMeasure, N: int, tail: float) -> np.ndarray:
    """``G[s] = E f(Pi + sum_j s_j delta_{y_j})`` for every shift ``s`` in ``{0..N}^m``."""
    m = len(levy)
    cut, pmf = quadrature.poisson_box(levy.weights, tail)
    ranges = [np.arange(k + N + 1) for k in cut]
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1) if m else np.zeros((0,), dtype=np.int64)
    F = np.asarray(f(grid.reshape(-1, m))).reshape(grid.shape[:-1]) if m else np.asarray(f(np.zeros(0, dtype=np.int64)))
    if m == 0:
        return np.asarray(F).reshape(())
    G = np.empty((N + 1,) * m, dtype=complex if np.iscomplexobj(F) else float)
    for s in itertools.product(range(N + 1), repeat=m):
        window = F[tuple(slice(sj, sj + kj + 1) for sj, kj in zip(s, cut))]
        G[s] = np.sum(window * pmf)
    return G


def _tau_from_shifts(G: np.ndarray, levy: AtomicLevyMeasure, n: int) -> SymFnTensor:
    m = len(levy)
    ex = exponents(m, n)
    vals = np.zeros(ex.shape[0], dtype=G.dtype)
    for row, k in enumerate(ex):
        # D^n at the multiset with exponent k is a product of k_j-th forward differences
        acc = 0
        for s in itertools.product(*[range(kj + 1) for kj in k]):
            sign = (-1) ** int(sum(kj - sj for kj, sj in zip(k, s)))
            coef = np.prod([comb(kj, sj, exact=True) for kj, sj in zip(k, s)])
            acc = acc + sign * coef * G[s]
        vals[row] = acc
    return SymFnTensor(n, levy, vals)


def last_penrose_all(f: ConfigFunction, levy: AtomicLevyMeasure, N: int, tail: float = EXACT_TAIL):
    """``[tau^0 f, ..., tau^N f]`` with ``tau^n f(y_1..y_n) = E D^n_{y_1..y_n} f(Pi)``."""
    if len(levy) == 0:
        val = np.asarray(f(np.zeros(0, dtype=np.int64)))
        return [SymFnTensor(0, levy, val.reshape(1))] + [SymFnTensor(n, levy, np.zeros(0)) for n in range(1, N + 1)]
    G = _shifted_expectations(f, levy, N, tail)
    return [_tau_from_shifts(G, levy, n) for n in range(N + 1)]


def last_penrose_tau(f: ConfigFunction, levy: AtomicLevyMeasure, n: int, tail: float = EXACT_TAIL) -> SymFnTensor:
    return last_penrose_all(f, levy, n, tail)[n]


# -- multiple integrals ----------------------------------------------------------------


def charlier_table(N: int, x, rate: float) -> np.ndarray:
    """Monic Charlier polynomials ``C_0..C_N`` at ``x``, orthogonal for Poisson(rate).

    ``C_{k+1}(x) = (x - k - w) C_k(x) - k w C_{k-1}(x)`` and ``E C_k(N)^2 = k! w^k``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((N + 1,) + x.shape)
    out[0] = 1.0
    if N >= 1:
        out[1] = x - rate
    for k in range(1, N):
        out[k + 1] = (x - k - rate) * out[k] - k * rate * out[k - 1]
    return out


def charlier(k: int, x, rate: float):
    return charlier_table(k, x, rate)[k]


def poisson_multiple_integral(t: SymFnTensor, eta, levy: AtomicLevyMeasure | None = None) -> np.ndarray:
    """``I_n(t)`` at configuration(s) ``eta``."""
    if isinstance(eta, PointConfiguration) and eta.levy is not t.levy:
        raise AtomSetMismatch("configuration and kernel use different atom sets")
    if levy is not None and levy is not t.levy:
        raise AtomSetMismatch("kernel is not over the given atom set")
    counts = np.asarray(_counts(eta), dtype=float)
    m = len(t.levy)
    if counts.shape[-1] != m:
        raise AtomSetMismatch(f"configuration has {counts.shape[-1]} atoms, kernel has {m}")
    ex = exponents(m, t.degree)
    basis = np.ones(counts.shape[:-1] + (ex.shape[0],))
    for j in range(m):
        C = charlier_table(t.degree, counts[..., j], t.levy.weights[j])
        basis = basis * np.moveaxis(C[ex[:, j]], 0, -1)
    return basis @ (multiplicities(m, t.degree) * t.values)


def last_penrose_reconstruct(f: ConfigFunction | Sequence[SymFnTensor], levy: AtomicLevyMeasure, N: int, eta):
    """``sum_{n <= N} I_n(tau^n f)(eta) / n!``."""
    kernels = f if isinstance(f, (list, tuple)) else last_penrose_all(f, levy, N)
    total = 0
    for n in range(N + 1):
        total = total + poisson_multiple_integral(kernels[n], eta) / math.factorial(n)
    return total


def _lattice(levy: AtomicLevyMeasure, tail: float = EXACT_TAIL):
    return quadrature.poisson_lattice(levy.weights, tail)


def last_penrose_l2_residual(f: ConfigFunction, levy: AtomicLevyMeasure, N: int) -> float:
    """``|| f - sum_{n<=N} I_n(tau^n f)/n! ||_{L^2(P_Pi)}`` by exact summation."""
    counts, pmf = _lattice(levy)
    diff = f(counts) - last_penrose_reconstruct(f, levy, N, counts)
    return float(np.sqrt(pmf @ np.abs(diff) ** 2))


def chaos_norms(f: ConfigFunction, levy: AtomicLevyMeasure, N: int) -> tuple[float, float]:
    """``(||f||^2_{L^2(P_Pi)}, sum_{n<=N} ||tau^n f||^2 / n!)``; equal for chaos degree <= N."""
    counts, pmf = _lattice(levy)
    lhs = float(pmf @ np.abs(f(counts)) ** 2)
    rhs = sum(t.norm() ** 2 / math.factorial(t.degree) for t in last_penrose_all(f, levy, N))
    return lhs, float(rhs)


def poisson_chaos_inner(s: SymFnTensor, t: SymFnTensor):
    """``E[conj(I_n(s)) I_m(t)]`` by exact summation."""
    counts, pmf = _lattice(s.levy)
    val = pmf @ (np.conj(poisson_multiple_integral(s, counts)) * poisson_multiple_integral(t, counts))
    return complex(val) if np.iscomplexobj(val) else float(val)


# -- difference operators on the ambient space ------------------------------------------------


def _law_rule(law: CompoundPoissonLaw):
    counts, pmf = _lattice(law.levy)
    return law.offset + counts @ law.levy.atoms, pmf


def _subset_sums(ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, d = ys.shape
    shifts, signs = [], []
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            shifts.append(ys[list(S)].sum(axis=0) if S else np.zeros(d))
            signs.append((-1) ** (n - r))
    return np.array(shifts).reshape(-1, d), np.array(signs, dtype=float)


def tilde_difference(f: Callable, x, ys) -> np.ndarray:
    """``D~^n_{y_1..y_n} f(x)`` with ``D~_y f(x) = f(x + y) - f(x)``."""
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float)).reshape(-1, x.shape[-1])
    shifts, signs = _subset_sums(ys)
    vals = np.stack([np.asarray(f(x + s)) for s in shifts], axis=-1)
    return vals @ signs


def expected_tilde_difference(law: CompoundPoissonLaw, f: TestFunction, ys):
    """``E_mu D~^n_{y_1..y_n} f`` by exact summation over the count lattice."""
    ys = np.asarray(ys, dtype=float).reshape(-1, law.dim)
    shifts, signs = _subset_sums(ys)
    pts, pmf = _law_rule(law)
    return signs @ f.expect_shifted(shifts, pts, pmf)


def product_formula_residual(law: CompoundPoissonLaw, xstar, ys) -> float:
    """``|E_mu D~^n_y K_{mu,x*} - prod_j (exp(i<y_j, x*>) - 1)|``."""
    xstar = np.asarray(xstar, dtype=float).reshape(-1)
    ys = np.asarray(ys, dtype=float).reshape(-1, law.dim)
    lhs = expected_tilde_difference(law, exp_martingale(law, xstar), ys)
    rhs = np.prod(np.exp(1j * (ys @ xstar)) - 1.0)
    return float(abs(lhs - rhs))


class _MehlerImage(TestFunction):
    """``P_T f`` as a test function on the source space (quadrature against ``rho``)."""

    def __init__(self, triple: SkewTriple, f: TestFunction):
        super().__init__(triple.mu1.dim)
        self.triple = triple
        self.f = f

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return mehler_apply(self.triple, self.f, flat).reshape(x.shape[:-1])

    def expect_shifted(self, base, offsets, weights):
        # E_q P_T f(b + o_q) = E_q E_r f(T b + T o_q + r)
        T = self.triple.T
        from .mehler import rho_rule

        rp, rw = rho_rule(self.triple.rho, self.f)
        off = (offsets @ T.T)[:, None, :] + rp[None, :, :]
        wts = weights[:, None] * rw[None, :]
        return self.f.expect_shifted(base @ T.T, off.reshape(-1, T.shape[0]), wts.reshape(-1))


def verify_tilde_intertwine(triple: SkewTriple, f: TestFunction, ys) -> float:
    """``|E_{mu1} D~^n_y P_T f - E_{mu2} D~^n_{T y} f|`` for ``ys`` of shape ``(n, d1)``."""
    ys = np.asarray(ys, dtype=float).reshape(-1, triple.mu1.dim)
    lhs = expected_tilde_difference(triple.mu1, _MehlerImage(triple, f), ys)
    rhs = expected_tilde_difference(triple.mu2, f, ys @ triple.T.T)
    return float(abs(lhs - rhs))


# -- second quantisation of T -----------------------------------------------------------


def match_atoms(T, levy1: AtomicLevyMeasure, levy2: AtomicLevyMeasure) -> np.ndarray:
    """Index of the ``nu2`` atom equal to ``T y_j`` for each ``nu1`` atom, ``-1`` when ``T y_j = 0``."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    img = levy1.atoms @ T.T
    out = np.full(len(levy1), -1, dtype=np.int64)
    for j, y in enumerate(img):
        if np.linalg.norm(y) <= SNAP_TOL:
            continue
        dist = np.linalg.norm(levy2.atoms - y, axis=1) if len(levy2) else np.array([np.inf])
        k = int(np.argmin(dist))
        if dist[k] > SNAP_TOL:
            raise AtomMismatch(f"T maps atom {levy1.atoms[j].tolist()} to {y.tolist()}, which is not an atom of nu2")
        out[j] = k
    return out


def contract_kernel(t: SymFnTensor, T, levy1: AtomicLevyMeasure) -> SymFnTensor:
    """``(g o T^{(n)})(y_1..y_n) = g(T y_1, ..., T y_n)`` as a kernel over the ``nu1`` atoms.

    Kernels produced by the Last-Penrose map vanish whenever an argument is
    the origin, so an atom with ``T y = 0`` gives value 0.
    """
    n = t.degree
    if n == 0:
        return SymFnTensor(0, levy1, t.values.copy())
    match = match_atoms(T, levy1, t.levy)
    ms1 = multisets(len(levy1), n)
    mapped = match[ms1]
    vals = np.zeros(ms1.shape[0], dtype=t.values.dtype)
    ok = np.all(mapped >= 0, axis=1)
    if ok.any():
        from .tensor import multiset_index

        idx = multiset_index(mapped[ok], len(t.levy))
        vals[ok] = t.values[idx]
    return SymFnTensor(n, levy1, vals)


@dataclass(frozen=True)
class DiagramResidual:
    residual: float
    per_order: tuple

    def __float__(self):
        return self.residual


def verify_poisson_diagram(triple: SkewTriple, f: TestFunction, N: int) -> DiagramResidual:
    """Largest ``L^2(nu1^n)`` gap between ``tau_1^n(j_1 P_T f)`` and ``contract(tau_2^n(j_2 f), T)``, ``n <= N``."""
    mu1, mu2 = triple.mu1, triple.mu2
    lhs = last_penrose_all(Pullback(mu1, _MehlerImage(triple, f)), mu1.levy, N)
    rhs = last_penrose_all(Pullback(mu2, f), mu2.levy, N)
    gaps = []
    for n in range(N + 1):
        diff = lhs[n] - contract_kernel(rhs[n], triple.T, mu1.levy)
        gaps.append(diff.norm())
    return DiagramResidual(float(max(gaps)), tuple(gaps))


__all__ = [
    "AtomSetMismatch",
    "ConfigFunction",
    "CountPolynomial",
    "ConfigCallback",
    "Pullback",
    "linear_statistic",
    "count_of",
    "difference_operator",
    "SymFnTensor",
    "kernels_to_json",
    "last_penrose_tau",
    "last_penrose_all",
    "charlier",
    "charlier_table",
    "poisson_multiple_integral",
    "last_penrose_reconstruct",
    "last_penrose_l2_residual",
    "chaos_norms",
    "poisson_chaos_inner",
    "tilde_difference",
    "expected_tilde_difference",
    "product_formula_residual",
    "verify_tilde_intertwine",
    "match_atoms",
    "contract_kernel",
    "verify_poisson_diagram",
    "DiagramResidual",
]
