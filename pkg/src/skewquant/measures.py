"""Centered Gaussian laws and shifted compound-Poisson laws on R^d.

Both classes have closed-form characteristic functions that vanish nowhere,
plus exact samplers.  A compound-Poisson law is the law of

    X = xi + sum_j N_j y_j - c,      N_j ~ Poisson(w_j) independent,

where ``c = sum_{|y_j| <= 1} w_j y_j`` compensates the small jumps only.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PSD_TOL = 1e-12


# -- laws ------------------------------------------------------------------------


def _factorise(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    off = cov - np.diag(np.diag(cov))
    if not np.any(off):
        # diagonal: keep the coordinate axes, in their original order
        diag = np.diag(cov)
        keep = diag > PSD_TOL * scale
        j = np.zeros((d, int(keep.sum())))
        j[np.flatnonzero(keep), np.arange(j.shape[1])] = np.sqrt(diag[keep])
        return j
    lam, vec = np.linalg.eigh(cov)
    order = np.argsort(-lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    keep = lam > PSD_TOL * scale
    lam, vec = lam[keep], vec[:, keep]
    # fix the sign gauge: largest-magnitude entry of each column positive
    pivot = vec[np.argmax(np.abs(vec), axis=0), np.arange(vec.shape[1])]
    vec = vec * np.sign(pivot)
    return vec * np.sqrt(lam)


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    """Centered Gaussian measure with covariance ``cov = j j^T``.

    ``factor`` (j) has full column rank ``r = rank(cov)``; its columns are
    mutually orthogonal, so the standard basis of R^r is an orthonormal basis
    of the reproducing kernel Hilbert space H.
    """

    cov: np.ndarray
    factor: np.ndarray = field(default=None)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got shape {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        lam_min = float(np.linalg.eigvalsh(cov)[0]) if cov.size else 0.0
        if lam_min < -PSD_TOL * scale:
            raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {lam_min:.3e})")
        if self.factor is None:
            j = _factorise(cov)
        else:
            j = np.atleast_2d(np.asarray(self.factor, dtype=float))
            if j.shape[0] != cov.shape[0] or np.max(np.abs(j @ j.T - cov), initial=0.0) > 1e-10:
                raise ValueError("factor does not reproduce the covariance")
        cov.setflags(write=False)
        j.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "factor", j)
        object.__setattr__(self, "_pinv", np.linalg.pinv(j) if j.size else np.zeros((0, cov.shape[0])))

    @classmethod
    def standard(cls, dim: int) -> "GaussianLaw":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def coordinates(self, x) -> np.ndarray:
        """H-coordinates ``z`` of points ``x = j z`` in the support."""
        return np.asarray(x, dtype=float) @ self._pinv.T

    def pushforward(self, T) -> "GaussianLaw":
        T = np.atleast_2d(np.asarray(T, dtype=float))
        return GaussianLaw(T @ self.cov @ T.T)

    def __repr__(self):
        return f"GaussianLaw(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class AtomicLevyMeasure:
    """Finite Levy measure ``sum_j w_j delta_{y_j}`` with no atom at the origin."""

    atoms: np.ndarray
    weights: np.ndarray
    dim: int = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.size == 0:
            if self.dim is None:
                raise ValueError("an empty Levy measure needs an explicit dim")
            atoms = np.zeros((0, self.dim))
        atoms = atoms.reshape(len(w), -1) if atoms.ndim < 2 else atoms
        if atoms.shape[0] != w.shape[0]:
            raise ValueError(f"{atoms.shape[0]} atoms but {w.shape[0]} weights")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        if atoms.shape[0] and np.min(np.linalg.norm(atoms, axis=1)) == 0.0:
            raise ValueError("a Levy measure has no atom at the origin")
        dim = atoms.shape[1] if self.dim is None else self.dim
        if atoms.shape[1] != dim:
            raise ValueError(f"atoms live in R^{atoms.shape[1]}, expected R^{dim}")
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def empty(cls, dim: int) -> "AtomicLevyMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def small(self) -> np.ndarray:
        """Mask of atoms with norm <= 1 (the compensated ones)."""
        return np.linalg.norm(self.atoms, axis=1) <= 1.0

    @property
    def compensator(self) -> np.ndarray:
        m = self.small
        return self.weights[m] @ self.atoms[m] if m.any() else np.zeros(self.dim)

    def __repr__(self):
        return f"AtomicLevyMeasure(dim={self.dim}, atoms={len(self)}, mass={self.total_mass:.4g})"


@dataclass(frozen=True, eq=False)
class CompoundPoissonLaw:
    """Law of ``shift + int x Pi_bar(dx)`` for a Poisson random measure with atomic intensity."""

    shift: np.ndarray
    levy: AtomicLevyMeasure

    def __post_init__(self):
        xi = np.asarray(self.shift, dtype=float).reshape(-1)
        if xi.shape[0] != self.levy.dim:
            raise ValueError(f"shift in R^{xi.shape[0]} but Levy measure on R^{self.levy.dim}")
        xi.setflags(write=False)
        object.__setattr__(self, "shift", xi)

    @property
    def dim(self) -> int:
        return self.levy.dim

    @property
    def offset(self) -> np.ndarray:
        """Deterministic part ``xi - c`` of the representation."""
        return self.shift - self.levy.compensator

    def levy_symbol(self, xstar) -> np.ndarray:
        u = np.asarray(xstar, dtype=float)
        phase = u @ self.levy.atoms.T
        jumps = (np.exp(1j * phase) - 1.0) @ self.levy.weights
        return 1j * (u @ self.offset) + jumps

    def pushforward(self, T) -> "CompoundPoissonLaw":
        """Image law under a linear map; image atoms at the origin are dropped, equal ones merged."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        img = self.levy.atoms @ T.T
        keep = np.linalg.norm(img, axis=1) > 0.0
        atoms, weights = _merge_atoms(img[keep], self.levy.weights[keep])
        levy = AtomicLevyMeasure(atoms, weights, dim=T.shape[0])
        # T X = T(xi - c) + sum N_j T y_j = shift' - c' + sum N_j T y_j
        return CompoundPoissonLaw(T @ self.offset + levy.compensator, levy)

    def __repr__(self):
        return f"CompoundPoissonLaw(dim={self.dim}, atoms={len(self.levy)})"


def _merge_atoms(atoms: np.ndarray, weights: np.ndarray, tol: float = 0.0):
    out_a, out_w = [], []
    for a, w in zip(atoms, weights):
        for k, b in enumerate(out_a):
            if np.linalg.norm(a - b) <= tol:
                out_w[k] += w
                break
        else:
            out_a.append(a)
            out_w.append(w)
    dim = atoms.shape[1]
    return np.array(out_a).reshape(-1, dim), np.array(out_w)


def dirac(point) -> CompoundPoissonLaw:
    """Point mass at ``point`` (compound Poisson with no atoms)."""
    point = np.asarray(point, dtype=float).reshape(-1)
    return CompoundPoissonLaw(point, AtomicLevyMeasure.empty(point.shape[0]))


# -- characteristic functions ------------------------------------------------------


@dataclass(frozen=True)
class CharFn:
    """Characteristic function ``x* -> E exp(i<X, x*>)`` on R^dim, vectorised over rows."""

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, xstar) -> np.ndarray | complex:
        u = np.asarray(xstar, dtype=float)
        if u.shape[-1] != self.dim:
            raise ValueError(f"functional has dimension {u.shape[-1]}, expected {self.dim}")
        out = np.asarray(self.fn(np.atleast_2d(u)), dtype=complex)
        return complex(out[0]) if u.ndim == 1 else out


def char_fn(law) -> CharFn:
    if isinstance(law, CharFn):
        return law
    if isinstance(law, GaussianLaw):
        cov = law.cov
        return CharFn(lambda u: np.exp(-0.5 * np.einsum("ij,jk,ik->i", u, cov, u)) + 0j, law.dim)
    if isinstance(law, CompoundPoissonLaw):
        return CharFn(lambda u: np.exp(law.levy_symbol(u)), law.dim)
    raise TypeError(f"no characteristic function for {type(law).__name__}")


def convolve_charfns(a, b) -> CharFn:
    a, b = char_fn(a), char_fn(b)
    if a.dim != b.dim:
        raise ValueError(f"cannot convolve laws on R^{a.dim} and R^{b.dim}")
    return CharFn(lambda u: a.fn(u) * b.fn(u), a.dim)


def pushforward_charfn(law, T) -> CharFn:
    """``x* -> law^(T^T x*)``: characteristic function of the image under ``T``."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    cf = char_fn(law)
    if T.shape[1] != cf.dim:
        raise ValueError(f"map of shape {T.shape} cannot act on R^{cf.dim}")
    return CharFn(lambda u: cf.fn(u @ T), T.shape[0])


def law_dim(law) -> int:
    return law.dim


# -- point configurations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """Finite counting measure on the atoms of a reference Levy measure."""

    levy: AtomicLevyMeasure
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if c.shape[0] != len(self.levy):
            raise ValueError(f"{c.shape[0]} multiplicities for {len(self.levy)} atoms")
        if np.any(c < 0):
            raise ValueError("multiplicities must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def add(self, atom: int, times: int = 1) -> "PointConfiguration":
        """``eta + times * delta_{y_atom}`` as a new configuration."""
        c = self.counts.copy()
        c[atom] += times
        return PointConfiguration(self.levy, c)

    def measure(self, mask) -> int:
        """``eta(B)`` for the atom subset selected by a boolean mask or index list."""
        return int(self.counts[np.asarray(mask)].sum())

    def integral(self) -> np.ndarray:
        """``int x eta(dx)``."""
        return self.counts @ self.levy.atoms

    def __eq__(self, other):
        return (
            isinstance(other, PointConfiguration)
            and other.levy is self.levy
            and np.array_equal(other.counts, self.counts)
        )

    def __hash__(self):
        return hash((id(self.levy), self.counts.tobytes()))


# -- sampling ------------------------------------------------------------------------


def sample_gaussian(law: GaussianLaw, rng: np.random.Generator, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be at least 1")
    z = rng.standard_normal((count, law.rank))
    return z @ law.factor.T


def sample_counts(levy: AtomicLevyMeasure, rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.poisson(levy.weights, size=(count, len(levy)))


def sample_compound_poisson(law: CompoundPoissonLaw, rng: np.random.Generator, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be at least 1")
    n = sample_counts(law.levy, rng, count)
    return law.offset + n @ law.levy.atoms


def sample(law, rng: np.random.Generator, count: int) -> np.ndarray:
    if isinstance(law, GaussianLaw):
        return sample_gaussian(law, rng, count)
    if isinstance(law, CompoundPoissonLaw):
        return sample_compound_poisson(law, rng, count)
    raise TypeError(f"cannot sample from {type(law).__name__}")


def sample_point_configuration(levy: AtomicLevyMeasure, rng: np.random.Generator) -> PointConfiguration:
    return PointConfiguration(levy, rng.poisson(levy.weights))


def spawn_rngs(seed: int, workers: int) -> list[np.random.Generator]:
    """Independent per-worker generators.

    Worker ``k`` uses ``SeedSequence(seed).spawn(workers)[k]``: child ``k`` is
    keyed by ``(seed, k)`` through SeedSequence's hashing, so streams depend
    only on the master seed and the worker index.
    """
    children = np.random.SeedSequence(seed).spawn(workers)
    return [np.random.default_rng(s) for s in children]


def sample_parallel(law, seed: int, count: int, workers: int = 1) -> np.ndarray:
    """Draw ``count`` samples split over ``workers`` streams; reproducible given (seed, workers)."""
    rngs = spawn_rngs(seed, workers)
    sizes = [count // workers + (k < count % workers) for k in range(workers)]
    jobs = [(r, s) for r, s in zip(rngs, sizes) if s > 0]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda job: sample(law, job[0], job[1]), jobs))
    return np.concatenate(parts, axis=0)


def empirical_charfn(samples: np.ndarray, xstar) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``exp(i<X, x*>)`` over samples with its complex standard error, per probe row."""
    u = np.atleast_2d(np.asarray(xstar, dtype=float))
    vals = np.exp(1j * samples @ u.T)
    mean = vals.mean(axis=0)
    se = np.sqrt(np.mean(np.abs(vals - mean) ** 2, axis=0) / samples.shape[0])
    return mean, se
