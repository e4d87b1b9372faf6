"""Random laws, skew triples and test functions for property checks and scenarios."""

from __future__ import annotations

import numpy as np

from .measures import AtomicLevyMeasure, CompoundPoissonLaw, GaussianLaw
from .skew import build_skew_factor, build_skew_factor_jump


def random_psd(rng: np.random.Generator, d: int, rank: int | None = None, ridge: float = 0.0) -> np.ndarray:
    rank = d if rank is None else rank
    G = rng.standard_normal((d, rank)) / np.sqrt(max(rank, 1))
    Q = G @ G.T + ridge * np.eye(d)
    return 0.5 * (Q + Q.T)


def random_gaussian_law(rng: np.random.Generator, d: int, allow_degenerate: bool = False) -> GaussianLaw:
    rank = int(rng.integers(1, d + 1)) if allow_degenerate else d
    ridge = 0.0 if rank < d else 0.3
    return GaussianLaw(random_psd(rng, d, rank, ridge))


def skew_scale_limit(T: np.ndarray, Q1: np.ndarray, Q2: np.ndarray) -> float:
    """Largest ``s`` with ``Q2 - s^2 T Q1 T^T`` PSD (``Q2`` nondegenerate)."""
    L = np.linalg.cholesky(Q2)
    K = np.linalg.solve(L, np.linalg.solve(L, T @ Q1 @ T.T).T)
    lam = float(np.max(np.linalg.eigvalsh(0.5 * (K + K.T))))
    return np.inf if lam <= 0 else 1.0 / np.sqrt(lam)


def random_gaussian_pair(rng: np.random.Generator, max_dim: int, scale: float, allow_degenerate: bool = True):
    """``(T, mu1, mu2)`` with ``T`` rescaled to ``scale`` times the skew limit.

    ``scale < 1`` gives a valid skew map, ``scale > 1`` an invalid one.
    """
    d1 = int(rng.integers(1, max_dim + 1))
    d2 = int(rng.integers(1, max_dim + 1))
    mu1 = random_gaussian_law(rng, d1, allow_degenerate)
    mu2 = random_gaussian_law(rng, d2, allow_degenerate=False)
    while True:
        T = rng.standard_normal((d2, d1))
        s = skew_scale_limit(T, mu1.cov, mu2.cov)
        if np.isfinite(s):
            return scale * s * T, mu1, mu2


def random_gaussian_triple(rng: np.random.Generator, max_dim: int = 3, allow_degenerate: bool = True):
    scale = float(rng.uniform(0.2, 0.95))
    T, mu1, mu2 = random_gaussian_pair(rng, max_dim, scale, allow_degenerate)
    return build_skew_factor(T, mu1, mu2)


def random_jump_law(rng: np.random.Generator, d: int, atoms: int, max_weight: float = 1.0) -> CompoundPoissonLaw:
    y = rng.standard_normal((atoms, d))
    w = rng.uniform(0.1, max_weight, atoms)
    return CompoundPoissonLaw(rng.standard_normal(d) * 0.5, AtomicLevyMeasure(y, w))


def random_jump_triple(rng: np.random.Generator, max_dim: int = 2, max_atoms: int = 3, max_weight: float = 1.0):
    """Valid jump skew triple: ``nu2`` dominates ``T nu1`` atom by atom, plus extra atoms."""
    d1 = int(rng.integers(1, max_dim + 1))
    d2 = int(rng.integers(1, max_dim + 1))
    m1 = int(rng.integers(1, max_atoms + 1))
    mu1 = random_jump_law(rng, d1, m1, max_weight)
    T = rng.standard_normal((d2, d1))
    image = mu1.pushforward(T)
    extra = int(rng.integers(0, max_atoms - len(image.levy) + 1)) if len(image.levy) < max_atoms else 0
    atoms = np.concatenate([image.levy.atoms, rng.standard_normal((extra, d2))], axis=0)
    weights = np.concatenate(
        [image.levy.weights + rng.uniform(0.0, 0.5, len(image.levy)), rng.uniform(0.1, max_weight, extra)]
    )
    mu2 = CompoundPoissonLaw(rng.standard_normal(d2) * 0.5, AtomicLevyMeasure(atoms, weights))
    return build_skew_factor_jump(T, mu1, mu2)


def random_unit(rng: np.random.Generator, r: int) -> np.ndarray:
    v = rng.standard_normal(r)
    return v / np.linalg.norm(v)


def random_functionals(rng: np.random.Generator, count: int, d: int, scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal((count, d))


def separated_functionals(
    rng: np.random.Generator, count: int, cov: np.ndarray, scale: float = 3.0, min_separation: float = 0.5
) -> np.ndarray:
    """Functionals whose pairwise distances ``sqrt(<Q(x_m - x_n), x_m - x_n>)`` all exceed ``min_separation``."""
    d = cov.shape[0]
    while True:
        u = scale * rng.standard_normal((count, d))
        diff = u[:, None, :] - u[None, :, :]
        dist = np.sqrt(np.einsum("mni,ij,mnj->mn", diff, cov, diff))
        if np.all(dist[np.triu_indices(count, 1)] > min_separation):
            return u


__all__ = [
    "separated_functionals",
    "random_psd",
    "random_gaussian_law",
    "skew_scale_limit",
    "random_gaussian_pair",
    "random_gaussian_triple",
    "random_jump_law",
    "random_jump_triple",
    "random_unit",
    "random_functionals",
]
