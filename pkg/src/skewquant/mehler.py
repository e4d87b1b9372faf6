"""The operator ``P_T f(x) = int f(T x + y) rho(dy)`` and exponential martingale vectors.

Two evaluation backends are provided.  ``quadrature`` integrates exactly
(up to rounding) against ``rho``: a Gauss-Hermite tensor grid over the range
of a Gaussian ``rho``, or the truncated Poisson count lattice of a jump
``rho``.  ``monte_carlo`` samples ``rho`` and reports a standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import quadrature
from .measures import CharFn, CompoundPoissonLaw, GaussianLaw, char_fn, sample
from .skew import SkewTriple

_CHUNK = 2_000_000


class UnsupportedQuadrature(ValueError):
    pass


class MCEstimate(NamedTuple):
    value: np.ndarray
    stderr: np.ndarray


# -- test functions --------------------------------------------------------------------


class TestFunction:
    """Complex-valued function on R^dim, vectorised over the leading axes of its argument."""

    __test__ = False  # not a pytest class
    kind = "bounded-callback"

    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def expect_shifted(self, base: np.ndarray, offsets: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """``sum_q weights[q] f(base[m] + offsets[q])`` for every row of ``base``."""
        out = np.empty(base.shape[0], dtype=complex)
        step = max(1, _CHUNK // max(1, offsets.shape[0]))
        for s in range(0, base.shape[0], step):
            b = base[s : s + step]
            vals = self(b[:, None, :] + offsets[None, :, :])
            out[s : s + step] = vals @ weights
        return out

    def suggested_nodes(self, scale: float) -> int:
        return quadrature.DEFAULT_NODES


class Callback(TestFunction):
    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dim: int):
        super().__init__(dim)
        self.fn = fn

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)))


class Polynomial(TestFunction):
    """``sum_a c_a x^a`` with exponent tuples ``a``."""

    kind = "polynomial"

    def __init__(self, terms: dict, dim: int):
        super().__init__(dim)
        self.terms = {tuple(int(k) for k in a): c for a, c in terms.items()}
        for a in self.terms:
            if len(a) != dim:
                raise ValueError(f"exponent {a} does not match dimension {dim}")
        self._exps = np.array(list(self.terms), dtype=np.int64).reshape(-1, dim)
        self._coefs = np.array(list(self.terms.values()))

    @property
    def degree(self) -> int:
        return int(self._exps.sum(axis=1).max()) if self.terms else 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        # table of x_j^k by repeated products, then gather per monomial
        pw = np.empty((self.degree + 1,) + x.shape)
        pw[0] = 1.0
        for k in range(1, self.degree + 1):
            pw[k] = pw[k - 1] * x
        mono = np.ones((len(self._coefs),) + x.shape[:-1])
        for j in range(self.dim):
            mono *= pw[self._exps[:, j], ..., j]
        return np.tensordot(self._coefs, mono, axes=(0, 0))

    def suggested_nodes(self, scale: float) -> int:
        return self.degree // 2 + 1

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator) -> "Polynomial":
        terms = {}
        for total in range(degree + 1):
            for a in _compositions(total, dim):
                terms[a] = rng.standard_normal()
        return cls(terms, dim)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _gh_nodes_for_frequency(a: float, tol: float = 1e-15) -> int:
    # Gauss-Hermite error for exp(iaz) is at most n! a^{2n} / (2n)!
    if a == 0:
        return 1
    for n in range(1, 80):
        log_err = math.lgamma(n + 1) + 2 * n * math.log(a) - math.lgamma(2 * n + 1)
        if log_err < math.log(tol):
            return max(n, 4)
    return 80


class TrigPolynomial(TestFunction):
    """``sum_l c_l exp(i <x, x*_l>)``."""

    kind = "trigonometric"

    def __init__(self, coeffs, functionals, dim: int | None = None):
        u = np.atleast_2d(np.asarray(functionals, dtype=float))
        super().__init__(u.shape[1] if dim is None else dim)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.functionals = u
        if self.coeffs.shape[0] != u.shape[0]:
            raise ValueError("one coefficient per functional required")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * x @ self.functionals.T) @ self.coeffs

    def expect_shifted(self, base, offsets, weights):
        # sum over q factorises frequency by frequency
        inner = np.exp(1j * offsets @ self.functionals.T).T @ weights
        return np.exp(1j * base @ self.functionals.T) @ (self.coeffs * inner)

    def suggested_nodes(self, scale: float) -> int:
        a = scale * float(np.max(np.linalg.norm(self.functionals, axis=1), initial=0.0))
        return _gh_nodes_for_frequency(a)

    @classmethod
    def random(cls, dim: int, terms: int, rng: np.random.Generator, scale: float = 1.0) -> "TrigPolynomial":
        c = rng.standard_normal(terms) + 1j * rng.standard_normal(terms)
        return cls(c, scale * rng.standard_normal((terms, dim)))


class ExpMartingaleVector(TrigPolynomial):
    """``K(x) = exp(i <x, x*>) / mu^(x*)``."""

    kind = "exp-martingale"

    def __init__(self, law, xstar):
        xstar = np.asarray(xstar, dtype=float).reshape(-1)
        self.law = law
        self.xstar = xstar
        self.norming = char_fn(law)(xstar)
        super().__init__([1.0 / self.norming], xstar[None, :])


def exp_martingale(mu, xstar) -> ExpMartingaleVector:
    return ExpMartingaleVector(mu, xstar)


# -- the operator P_T ---------------------------------------------------------------


def rho_rule(rho, f: TestFunction, nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Integration points and weights for ``rho`` (exact for the supported classes)."""
    if isinstance(rho, GaussianLaw):
        r = rho.rank
        if r > quadrature.MAX_GRID_DIM:
            raise UnsupportedQuadrature(
                f"Gaussian factor of rank {r} exceeds the tensor-grid cap {quadrature.MAX_GRID_DIM}"
            )
        if nodes is None:
            scale = float(np.sqrt(np.max(np.linalg.eigvalsh(rho.cov), initial=0.0)))
            nodes = f.suggested_nodes(scale)
        z, w = quadrature.normal_grid(r, nodes)
        return z @ rho.factor.T, w
    if isinstance(rho, CompoundPoissonLaw):
        counts, pmf = quadrature.poisson_lattice(rho.levy.weights)
        return rho.offset + counts @ rho.levy.atoms, pmf
    raise UnsupportedQuadrature(f"no quadrature rule for {type(rho).__name__}")


def mehler_apply(
    triple: SkewTriple,
    f: TestFunction,
    x,
    method: str = "quadrature",
    nodes: int | None = None,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
):
    """Evaluate ``P_T f`` at the point(s) ``x``.

    Returns the values for ``method="quadrature"`` and an ``MCEstimate``
    (values and standard errors) for ``method="monte_carlo"``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    base = np.atleast_2d(x) @ triple.T.T
    if method == "quadrature":
        pts, wts = rho_rule(triple.rho, f, nodes)
        out = f.expect_shifted(base, pts, wts)
        return out[0] if single else out
    if method == "monte_carlo":
        if isinstance(triple.rho, CharFn):
            raise UnsupportedQuadrature("cannot sample a law given only by its characteristic function")
        rng = np.random.default_rng() if rng is None else rng
        y = sample(triple.rho, rng, n_samples)
        w = np.full(n_samples, 1.0 / n_samples)
        mean = f.expect_shifted(base, y, w)
        second = np.empty(base.shape[0])
        for m in range(base.shape[0]):
            vals = f(base[m] + y)
            second[m] = np.mean(np.abs(vals - mean[m]) ** 2)
        se = np.sqrt(second / n_samples)
        return MCEstimate(mean[0], se[0]) if single else MCEstimate(mean, se)
    raise ValueError(f"unknown method {method!r}")


class ContractionCheck(NamedTuple):
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 3.0 * math.hypot(self.lhs_se, self.rhs_se)


def _lp_norm_mc(values: np.ndarray, p: float) -> tuple[float, float]:
    a = np.abs(values) ** p
    m = float(a.mean())
    se_m = float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0
    norm = m ** (1.0 / p)
    se = (1.0 / p) * m ** (1.0 / p - 1.0) * se_m if m > 0 else 0.0
    return norm, se


def mehler_contraction_residual(
    triple: SkewTriple,
    f: TestFunction,
    p: float = 2.0,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
    nodes: int | None = None,
) -> ContractionCheck:
    """Monte Carlo estimates of ``||P_T f||_{L^p(mu1)}`` and ``||f||_{L^p(mu2)}``.

    The outer integrals are sampled; ``P_T f`` itself is evaluated by quadrature.
    """
    if not 1 <= p < math.inf:
        raise ValueError("p must lie in [1, inf)")
    rng = np.random.default_rng() if rng is None else rng
    x1 = sample(triple.mu1, rng, n_samples)
    x2 = sample(triple.mu2, rng, n_samples)
    lhs, lhs_se = _lp_norm_mc(mehler_apply(triple, f, x1, nodes=nodes), p)
    rhs, rhs_se = _lp_norm_mc(f(x2), p)
    return ContractionCheck(lhs, rhs, lhs_se, rhs_se)


def _law_rule(law, nodes: int):
    if isinstance(law, GaussianLaw):
        z, w = quadrature.normal_grid(law.rank, nodes)
        return z @ law.factor.T, w
    counts, pmf = quadrature.poisson_lattice(law.levy.weights)
    return law.offset + counts @ law.levy.atoms, pmf


def mehler_l2_norms(triple: SkewTriple, f: TestFunction, nodes: int | None = None) -> tuple[float, float]:
    """``(||P_T f||_{L^2(mu1)}, ||f||_{L^2(mu2)})`` by deterministic quadrature.

    Exact for polynomials when ``nodes`` exceeds the degree (the default).
    """
    outer = nodes if nodes is not None else (f.degree + 1 if isinstance(f, Polynomial) else quadrature.DEFAULT_NODES)
    x1, w1 = _law_rule(triple.mu1, outer)
    x2, w2 = _law_rule(triple.mu2, outer)
    ptf = mehler_apply(triple, f, x1, nodes=nodes)
    lhs = float(np.sqrt(max(w1 @ np.abs(ptf) ** 2, 0.0)))
    rhs = float(np.sqrt(max(w2 @ np.abs(f(x2)) ** 2, 0.0)))
    return lhs, rhs


def verify_identityPTK(triple: SkewTriple, xstar, probes, nodes: int | None = None) -> float:
    """Max over probe points of ``|P_T K_{mu2,x*}(x) - K_{mu1,T^T x*}(x)|``."""
    xstar = np.asarray(xstar, dtype=float).reshape(-1)
    k2 = exp_martingale(triple.mu2, xstar)
    k1 = exp_martingale(triple.mu1, triple.T.T @ xstar)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    lhs = mehler_apply(triple, k2, probes, nodes=nodes)
    return float(np.max(np.abs(lhs - k1(probes))))


@dataclass(frozen=True)
class GramCertificate:
    gram: np.ndarray
    lambda_min: float

    def __iter__(self):
        return iter((self.gram, self.lambda_min))


def gram_independence(mu, functionals) -> GramCertificate:
    """Gram matrix ``G_mn = mu^(x*_m - x*_n)`` of the functions ``exp(i<., x*_m>)`` in ``L^2(mu)``."""
    u = np.atleast_2d(np.asarray(functionals, dtype=float))
    diff = (u[:, None, :] - u[None, :, :]).reshape(-1, u.shape[1])
    G = char_fn(mu).fn(diff).reshape(u.shape[0], u.shape[0])
    G = 0.5 * (G + G.conj().T)
    if np.allclose(G.imag, 0.0):
        G = G.real
    return GramCertificate(G, float(np.linalg.eigvalsh(G)[0]))
