"""Finite-dimensional generalised Ornstein-Uhlenbeck processes.

``dY = A Y dt + dL`` with ``L`` a Brownian motion of covariance ``B`` per unit
time or a compound Poisson process whose time-one law is a
``CompoundPoissonLaw``.  ``mu_t`` is the law of ``int_0^t S(t-u) dL(u)``
with ``S(t) = exp(tA)``; the pairs ``(mu_s, mu_{s+t})`` are skew for ``S(t)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .measures import CharFn, CompoundPoissonLaw, GaussianLaw, char_fn, dirac
from .mehler import TrigPolynomial
from .skew import verify_semigroup_law

STABILITY_MARGIN = 1e-8
TIME_TOL = 1e-12


class NotStable(ValueError):
    def __init__(self, abscissa: float):
        super().__init__(f"spectral abscissa {abscissa:.6g} is not below {-STABILITY_MARGIN:g}; no invariant law")
        self.abscissa = abscissa


@dataclass(frozen=True, eq=False)
class OUSystem:
    """Drift matrix ``A`` and driver: ``GaussianLaw`` (covariance per unit time) or ``CompoundPoissonLaw`` (law of ``L(1)``)."""

    A: np.ndarray
    driver: GaussianLaw | CompoundPoissonLaw

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1] or A.shape[0] != self.driver.dim:
            raise ValueError(f"A has shape {A.shape}, driver lives in R^{self.driver.dim}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.driver, GaussianLaw)

    def S(self, t: float) -> np.ndarray:
        return linalg.expm(t * self.A)

    def integrated_S(self, t: float) -> np.ndarray:
        """``int_0^t S(u) du``."""
        d = self.dim
        blk = np.zeros((2 * d, 2 * d))
        blk[:d, :d] = self.A
        blk[:d, d:] = np.eye(d)
        return linalg.expm(t * blk)[:d, d:]

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.A).real))


def gaussian_marginal_cov(sys: OUSystem, t: float) -> np.ndarray:
    """``int_0^t S(u) B S(u)^T du`` from one block exponential."""
    d = sys.dim
    blk = np.zeros((2 * d, 2 * d))
    blk[:d, :d] = -sys.A
    blk[:d, d:] = sys.driver.cov
    blk[d:, d:] = sys.A.T
    F = linalg.expm(t * blk)
    Q = F[d:, d:].T @ F[:d, d:]
    return 0.5 * (Q + Q.T)


def _jump_exponent(sys: OUSystem, u: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """``int_lo^hi zeta(S(s)^T u) ds`` for each row of ``u``."""
    law = sys.driver
    levy = law.levy
    # drift part is linear in s -> closed form through int S
    if np.isfinite(hi):
        IS = sys.integrated_S(hi) - sys.integrated_S(lo)
    else:
        IS = -np.linalg.solve(sys.A, sys.S(lo))
    drift = 1j * (u @ (IS @ law.offset))
    if len(levy) == 0:
        return drift
    P = u.shape[0]

    def integrand(s):
        # <S(s)^T u, y> = <u, S(s) y>
        phase = u @ (sys.S(s) @ levy.atoms.T)
        val = (np.exp(1j * phase) - 1.0) @ levy.weights
        return np.concatenate([val.real, val.imag])

    res, _ = integrate.quad_vec(integrand, lo, hi, epsabs=TIME_TOL, epsrel=TIME_TOL)
    return drift + res[:P] + 1j * res[P:]


def marginal_law(sys: OUSystem, t: float):
    """Law ``mu_t``: a ``GaussianLaw`` for Brownian drivers, a ``CharFn`` for jump drivers."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sys.is_gaussian:
        return GaussianLaw(gaussian_marginal_cov(sys, t))
    if t == 0:
        return dirac(np.zeros(sys.dim))
    return CharFn(lambda u: np.exp(_jump_exponent(sys, np.atleast_2d(u), 0.0, t)), sys.dim)


def verify_skew_semigroup(sys: OUSystem, s: float, t: float, probes: int = 50, rng=None, scale: float = 1.0) -> float:
    """Residual of ``mu_{s+t} = S(t) mu_s * mu_t`` on random functionals."""
    return verify_semigroup_law(sys.S, lambda r: marginal_law(sys, r), s, t, probes, rng, scale)


def invariant_law(sys: OUSystem):
    """``mu_infinity``: Lyapunov solution for Brownian drivers, a ``CharFn`` for jump drivers."""
    a = sys.spectral_abscissa
    if a >= -STABILITY_MARGIN:
        raise NotStable(a)
    if sys.is_gaussian:
        Q = linalg.solve_continuous_lyapunov(sys.A, -sys.driver.cov)
        return GaussianLaw(0.5 * (Q + Q.T))
    return CharFn(lambda u: np.exp(_jump_exponent(sys, np.atleast_2d(u), 0.0, np.inf)), sys.dim)


def lyapunov_residual(sys: OUSystem, Q: np.ndarray) -> float:
    return float(np.max(np.abs(sys.A @ Q + Q @ sys.A.T + sys.driver.cov)))


def invariant_fixed_point_residual(sys: OUSystem, t: float, probes: int = 50, rng=None, scale: float = 1.0) -> float:
    """Max over probes of ``|mu_inf^(u) - mu_inf^(S(t)^T u) mu_t^(u)|``."""
    rng = np.random.default_rng(0) if rng is None else rng
    inv = char_fn(invariant_law(sys))
    mt = char_fn(marginal_law(sys, t))
    u = scale * rng.standard_normal((probes, sys.dim))
    return float(np.max(np.abs(inv.fn(u) - inv.fn(u @ sys.S(t)) * mt.fn(u))))


# -- the Mehler semigroup on trigonometric polynomials -----------------------------


def mehler_semigroup(sys: OUSystem, t: float, f: TrigPolynomial) -> TrigPolynomial:
    """``P_t f(x) = int f(S(t) x + y) mu_t(dy)``; closed on the trigonometric class."""
    u = f.functionals
    mt = char_fn(marginal_law(sys, t))
    return TrigPolynomial(f.coeffs * mt.fn(u), u @ sys.S(t), dim=f.dim)


def chapman_kolmogorov_residual(sys: OUSystem, s: float, t: float, f: TrigPolynomial, probes) -> float:
    """Max over probe points of ``|P_s P_t f - P_{s+t} f|``."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    lhs = mehler_semigroup(sys, s, mehler_semigroup(sys, t, f))(probes)
    rhs = mehler_semigroup(sys, s + t, f)(probes)
    return float(np.max(np.abs(lhs - rhs)))


def invariance_residual(sys: OUSystem, t: float, f: TrigPolynomial) -> float:
    """``|int P_t f d mu_inf - int f d mu_inf|``."""
    inv = char_fn(invariant_law(sys))
    g = mehler_semigroup(sys, t, f)
    return float(abs(g.coeffs @ inv.fn(g.functionals) - f.coeffs @ inv.fn(f.functionals)))


# -- path simulation --------------------------------------------------------------------


def _noise(sys: OUSystem, dt: float, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    d = sys.dim
    if sys.is_gaussian:
        law = GaussianLaw(gaussian_marginal_cov(sys, dt))
        return rng.standard_normal((n_paths, law.rank)) @ law.factor.T
    law = sys.driver
    out = np.tile(sys.integrated_S(dt) @ law.offset, (n_paths, 1))
    for y, w in zip(law.levy.atoms, law.levy.weights):
        k = rng.poisson(w * dt, n_paths)
        total = int(k.sum())
        if total == 0:
            continue
        # exact jump times are uniform on [0, dt]; the jump at tau is carried to dt by S(dt - tau)
        tau = rng.uniform(0.0, dt, total)
        carried = linalg.expm((dt - tau)[:, None, None] * sys.A) @ y
        np.add.at(out, np.repeat(np.arange(n_paths), k), carried)
    return out


def simulate_path(sys: OUSystem, y0, t_grid, rng: np.random.Generator, n_paths: int = 1) -> np.ndarray:
    """Exact-in-law samples of ``Y`` on ``t_grid``; shape ``(n_paths, len(t_grid), d)``."""
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    y = np.tile(np.asarray(y0, dtype=float).reshape(-1), (n_paths, 1))
    out = np.empty((n_paths, t_grid.size, sys.dim))
    out[:, 0] = y
    for k in range(1, t_grid.size):
        dt = t_grid[k] - t_grid[k - 1]
        y = y @ sys.S(dt).T + _noise(sys, dt, n_paths, rng)
        out[:, k] = y
    return out


def write_path_csv(path: np.ndarray, t_grid, fh) -> None:
    """One row per grid time: ``t, y_1, ..., y_d`` (a single path)."""
    path = np.asarray(path)
    if path.ndim == 3:
        path = path[0]
    w = csv.writer(fh)
    w.writerow(["t"] + [f"y{i + 1}" for i in range(path.shape[1])])
    for t, row in zip(np.asarray(t_grid, dtype=float), path):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def time_marginal_charfn(sys: OUSystem, y0, t: float) -> CharFn:
    """Char function of ``Y(t) = S(t) y0 + int_0^t S(t-u) dL(u)``."""
    mean = sys.S(t) @ np.asarray(y0, dtype=float).reshape(-1)
    mt = char_fn(marginal_law(sys, t))
    return CharFn(lambda u: np.exp(1j * (u @ mean)) * mt.fn(u), sys.dim)


__all__ = [
    "OUSystem",
    "NotStable",
    "marginal_law",
    "gaussian_marginal_cov",
    "verify_skew_semigroup",
    "invariant_law",
    "lyapunov_residual",
    "invariant_fixed_point_residual",
    "mehler_semigroup",
    "chapman_kolmogorov_residual",
    "invariance_residual",
    "simulate_path",
    "write_path_csv",
    "time_marginal_charfn",
]
