"""Deterministic integration rules: Gauss-Hermite tensor grids and truncated Poisson lattices."""

from __future__ import annotations

import functools
import itertools

import numpy as np
from numpy.polynomial import hermite_e
from scipy import stats

POISSON_TAIL = 1e-14
MAX_GRID_DIM = 4
DEFAULT_NODES = 40


@functools.lru_cache(maxsize=None)
def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal density."""
    x, w = hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def normal_grid(dim: int, nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule for ``E g(Z)``, ``Z ~ N(0, I_dim)``.

    Exact for polynomials of degree ``<= 2*nodes - 1`` in each coordinate.
    Returns points of shape ``(nodes**dim, dim)`` and matching weights.
    """
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = gauss_hermite(nodes)
    pts = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    wts = functools.reduce(np.multiply.outer, [w] * dim).reshape(-1)
    return pts, wts


def poisson_cutoff(rate: float, tail: float = POISSON_TAIL) -> int:
    """Smallest K with P(N > K) < tail for N ~ Poisson(rate)."""
    if rate <= 0:
        return 0
    k = int(np.ceil(rate))
    while stats.poisson.sf(k, rate) >= tail:
        k += 1
    # step back while the tail condition still holds
    while k > 0 and stats.poisson.sf(k - 1, rate) < tail:
        k -= 1
    return k


def poisson_lattice(rates, tail: float = POISSON_TAIL, extra: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """All count vectors up to the per-coordinate cutoffs, with product Poisson pmf.

    ``extra`` enlarges each coordinate's range (the probabilities of the extra
    points are still the Poisson pmf); useful when shifted windows are needed.
    """
    rates = np.asarray(rates, dtype=float).reshape(-1)
    if rates.size == 0:
        return np.zeros((1, 0), dtype=np.int64), np.ones(1)
    cut = [poisson_cutoff(r, tail) + extra for r in rates]
    counts = np.array(list(itertools.product(*[range(k + 1) for k in cut])), dtype=np.int64)
    pmf = np.ones(counts.shape[0])
    for j, r in enumerate(rates):
        pmf *= stats.poisson.pmf(counts[:, j], r)
    return counts, pmf


def poisson_box(rates, tail: float = POISSON_TAIL, extra: int = 0):
    """Count lattice as a dense box: per-axis ranges plus the pmf tensor of the untruncated part.

    Returns ``(cutoffs, pmf)`` where ``pmf`` has shape ``(K_1+1, ..., K_m+1)``.
    Points beyond the cutoffs (up to ``K_j + extra``) exist only for shifting.
    """
    rates = np.asarray(rates, dtype=float).reshape(-1)
    cut = [poisson_cutoff(r, tail) for r in rates]
    axes = [stats.poisson.pmf(np.arange(k + 1), r) for k, r in zip(cut, rates)]
    pmf = functools.reduce(np.multiply.outer, axes) if axes else np.ones(())
    return np.array(cut, dtype=np.int64), pmf
