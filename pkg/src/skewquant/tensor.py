"""Symmetric tensor powers of R^d and truncated symmetric Fock spaces.

A symmetric n-tensor over R^d is stored by one coefficient per multiset of
basis indices.  The coefficient attached to a multiset ``alpha`` is the
coefficient of the normalised symmetric basis tensor

    sym(e_alpha) = (1/n!) * sum_{sigma in S_n} e_{alpha_sigma(1)} x ... x e_{alpha_sigma(n)},

which is the same thing as the coefficient of the monomial ``x^alpha`` in the
homogeneous polynomial ``p_t(x) = t(x, ..., x)``.  Under this convention

    <s, t> = sum_alpha conj(s_alpha) t_alpha / mult(alpha),

where ``mult(alpha) = n! / prod(k_i!)`` counts the distinct orderings of
``alpha``, and lifting a linear map ``A`` to ``A^{(.)n}`` is the substitution
``p(x) -> p(A^T y)``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SymTensor",
    "FockVector",
    "multisets",
    "multiplicities",
    "symmetrize",
    "sym_power",
    "lift_map",
    "fock_apply",
    "contract",
    "basis_tensor",
]


# -- multiset index tables ---------------------------------------------------


@functools.lru_cache(maxsize=None)
def multisets(dim: int, degree: int) -> np.ndarray:
    """Sorted index tuples of length ``degree`` over ``range(dim)``, lexicographic."""
    rows = list(itertools.combinations_with_replacement(range(dim), degree))
    out = np.array(rows, dtype=np.int64).reshape(len(rows), degree)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def exponents(dim: int, degree: int) -> np.ndarray:
    """Exponent vectors (counts per basis index) of every multiset, shape (M, dim)."""
    ms = multisets(dim, degree)
    out = np.zeros((ms.shape[0], dim), dtype=np.int64)
    for col in range(degree):
        np.add.at(out, (np.arange(ms.shape[0]), ms[:, col]), 1)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def multiplicities(dim: int, degree: int) -> np.ndarray:
    """Number of distinct orderings of each multiset, ``n! / prod(k_i!)``."""
    ex = exponents(dim, degree)
    fact = np.array([math.factorial(k) for k in range(degree + 1)], dtype=float)
    out = math.factorial(degree) / np.prod(fact[ex], axis=1)
    out.setflags(write=False)
    return out


def _encode(sorted_idx: np.ndarray, dim: int) -> np.ndarray:
    degree = sorted_idx.shape[-1]
    weights = dim ** np.arange(degree - 1, -1, -1, dtype=np.int64)
    return sorted_idx @ weights


@functools.lru_cache(maxsize=None)
def _codes(dim: int, degree: int) -> np.ndarray:
    return _encode(multisets(dim, degree), dim)


def multiset_index(idx: np.ndarray, dim: int) -> np.ndarray:
    """Position of each (unsorted) index tuple's multiset in ``multisets(dim, n)``."""
    idx = np.sort(np.asarray(idx, dtype=np.int64), axis=-1)
    degree = idx.shape[-1]
    return np.searchsorted(_codes(dim, degree), _encode(idx, dim))


@functools.lru_cache(maxsize=None)
def _flat_to_multiset(dim: int, degree: int) -> np.ndarray:
    grid = np.indices((dim,) * degree).reshape(degree, -1).T
    return multiset_index(grid, dim)


@functools.lru_cache(maxsize=None)
def _raise_table(dim: int, degree: int) -> np.ndarray:
    # (M_degree, dim): index in degree+1 of alpha + {k}
    ms = multisets(dim, degree)
    out = np.empty((ms.shape[0], dim), dtype=np.int64)
    for k in range(dim):
        ext = np.concatenate([ms, np.full((ms.shape[0], 1), k)], axis=1)
        out[:, k] = multiset_index(ext, dim)
    return out


def n_multisets(dim: int, degree: int) -> int:
    return math.comb(dim + degree - 1, degree)


# -- symmetric tensors -------------------------------------------------------


@dataclass(frozen=True)
class SymTensor:
    """Symmetric ``degree``-tensor over R^dim (complex coefficients allowed)."""

    degree: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"degree must be nonnegative, got {self.degree}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        c = np.array(self.coeffs, copy=True)
        if not np.iscomplexobj(c):
            c = c.astype(float)
        c = c.reshape(-1)
        expected = n_multisets(self.dim, self.degree)
        if c.shape[0] != expected:
            raise ValueError(
                f"degree-{self.degree} tensor over R^{self.dim} needs {expected} "
                f"coefficients, got {c.shape[0]}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, dim: int, degree: int, dtype=float) -> "SymTensor":
        return cls(degree, dim, np.zeros(n_multisets(dim, degree), dtype=dtype))

    @classmethod
    def scalar(cls, value, dim: int) -> "SymTensor":
        return cls(0, dim, np.array([value]))

    @property
    def multisets(self) -> np.ndarray:
        return multisets(self.dim, self.degree)

    def inner(self, other: "SymTensor") -> complex | float:
        _check_same_space(self, other)
        w = multiplicities(self.dim, self.degree)
        val = np.vdot(self.coeffs, other.coeffs / w)
        return complex(val) if np.iscomplexobj(val) else float(val)

    def norm(self) -> float:
        w = multiplicities(self.dim, self.degree)
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2 / w)))

    def to_dense(self) -> np.ndarray:
        """Full ``dim**degree`` array of tensor entries."""
        pos = _flat_to_multiset(self.dim, self.degree)
        w = multiplicities(self.dim, self.degree)
        flat = (self.coeffs / w)[pos]
        return flat.reshape((self.dim,) * self.degree)

    def _combine(self, other, op) -> "SymTensor":
        _check_same_space(self, other)
        return SymTensor(self.degree, self.dim, op(self.coeffs, other.coeffs))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return SymTensor(self.degree, self.dim, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SymTensor(self.degree, self.dim, -self.coeffs)

    def allclose(self, other: "SymTensor", atol: float = 1e-12) -> bool:
        _check_same_space(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))


def _check_same_space(a: SymTensor, b: SymTensor) -> None:
    if a.degree != b.degree or a.dim != b.dim:
        raise ValueError(
            f"tensor spaces differ: degree {a.degree} over R^{a.dim} vs "
            f"degree {b.degree} over R^{b.dim}"
        )


def basis_tensor(dim: int, alpha: Sequence[int]) -> SymTensor:
    """The normalised symmetric basis tensor ``sym(e_alpha)`` (coefficient 1 on ``alpha``)."""
    degree = len(alpha)
    coeffs = np.zeros(n_multisets(dim, degree))
    if degree == 0:
        coeffs[0] = 1.0
    else:
        coeffs[multiset_index(np.array([alpha]), dim)[0]] = 1.0
    return SymTensor(degree, dim, coeffs)


def symmetrize(t) -> SymTensor:
    """Project a dense n-tensor onto its symmetric part.

    Uses the normalised projection ``(1/n!) sum_sigma``, so applying it to an
    already symmetric tensor changes nothing.
    """
    t = np.asarray(t)
    if not (np.iscomplexobj(t) or np.issubdtype(t.dtype, np.floating)):
        t = t.astype(float)
    degree = t.ndim
    if degree == 0:
        raise ValueError("a degree-0 tensor needs an explicit dimension; use SymTensor.scalar")
    dim = t.shape[0]
    if any(s != dim for s in t.shape):
        raise ValueError(f"tensor axes have mismatched dimensions {t.shape}")
    pos = _flat_to_multiset(dim, degree)
    coeffs = np.zeros(n_multisets(dim, degree), dtype=t.dtype)
    np.add.at(coeffs, pos, t.reshape(-1))
    return SymTensor(degree, dim, coeffs)


def sym_power(h, n: int) -> SymTensor:
    """The rank-one tensor ``h x h x ... x h`` (n factors)."""
    h = np.asarray(h)
    if h.ndim != 1:
        raise ValueError("h must be a vector")
    if n < 0:
        raise ValueError(f"degree must be nonnegative, got {n}")
    dim = h.shape[0]
    if n == 0:
        return SymTensor.scalar(1.0, dim)
    ex = exponents(dim, n)
    mono = np.prod(h[None, :] ** ex, axis=1)
    return SymTensor(n, dim, multiplicities(dim, n) * mono)


@functools.lru_cache(maxsize=64)
def _lift_cached(key: bytes, shape: tuple, dtype: str, n: int) -> np.ndarray:
    A = np.frombuffer(key, dtype=dtype).reshape(shape)
    return _lift_matrix(A, n)


def _lift_matrix(A: np.ndarray, n: int) -> np.ndarray:
    d2, d1 = A.shape
    L = np.ones((1, 1), dtype=A.dtype)
    for m in range(n):
        nxt = multisets(d1, m + 1)
        parent = multiset_index(nxt[:, :-1], d1) if m > 0 else np.zeros(nxt.shape[0], dtype=np.int64)
        last = nxt[:, -1]
        rt = _raise_table(d2, m)
        new = np.zeros((n_multisets(d2, m + 1), nxt.shape[0]), dtype=A.dtype)
        cols = L[:, parent]
        for k in range(d2):
            new[rt[:, k]] += cols * A[k, last][None, :]
        L = new
    return L


def lift_map(A, n: int) -> np.ndarray:
    """Matrix of the symmetric power ``A^{(.)n}`` in multiset coordinates.

    ``A`` maps R^d1 -> R^d2 (shape ``(d2, d1)``); the result has shape
    ``(C(d2+n-1, n), C(d1+n-1, n))`` and acts on ``SymTensor.coeffs``.
    """
    A = np.ascontiguousarray(A)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    if not np.iscomplexobj(A):
        A = A.astype(float)
    if n < 0:
        raise ValueError(f"degree must be nonnegative, got {n}")
    return _lift_cached(A.tobytes(), A.shape, A.dtype.str, n)


def apply_lift(A, t: SymTensor) -> SymTensor:
    A = np.asarray(A)
    if A.shape[1] != t.dim:
        raise ValueError(f"map has source dimension {A.shape[1]}, tensor lives over R^{t.dim}")
    return SymTensor(t.degree, A.shape[0], lift_map(A, t.degree) @ t.coeffs)


def contract(t: SymTensor, vectors: Sequence) -> complex | float:
    """Full contraction ``<t, v_1 x ... x v_n>`` against (unsymmetrised) vectors."""
    if len(vectors) != t.degree:
        raise ValueError(f"need {t.degree} vectors, got {len(vectors)}")
    out = t.to_dense()
    for v in vectors:
        out = np.tensordot(out, np.asarray(v), axes=([0], [0]))
    return out.item() if np.ndim(out) == 0 else out


# -- Fock space ----------------------------------------------------------------


@dataclass(frozen=True)
class FockVector:
    """Truncated element ``(f_0, ..., f_N)`` of the symmetric Fock space over R^dim."""

    dim: int
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        for n, c in enumerate(comps):
            if c.degree != n or c.dim != self.dim:
                raise ValueError(
                    f"component {n} must be a degree-{n} tensor over R^{self.dim}, "
                    f"got degree {c.degree} over R^{c.dim}"
                )
        if not comps:
            raise ValueError("a Fock vector needs at least the degree-0 component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_components(cls, components: Iterable[SymTensor]) -> "FockVector":
        comps = tuple(components)
        return cls(comps[0].dim, comps)

    @classmethod
    def vacuum(cls, dim: int, truncation: int) -> "FockVector":
        comps = [SymTensor.scalar(1.0, dim)] + [SymTensor.zeros(dim, n) for n in range(1, truncation + 1)]
        return cls(dim, tuple(comps))

    @property
    def truncation(self) -> int:
        return len(self.components) - 1

    def __getitem__(self, n: int) -> SymTensor:
        return self.components[n]

    def norm(self) -> float:
        return float(np.sqrt(sum(c.norm() ** 2 for c in self.components)))

    def inner(self, other: "FockVector") -> complex | float:
        if other.truncation != self.truncation:
            raise ValueError("truncations differ")
        return sum(a.inner(b) for a, b in zip(self.components, other.components))

    def __sub__(self, other: "FockVector") -> "FockVector":
        if other.truncation != self.truncation:
            raise ValueError("truncations differ")
        return FockVector(self.dim, tuple(a - b for a, b in zip(self.components, other.components)))

    def to_json_dict(self) -> dict:
        """``{degree: {"i,j,..": coefficient}}``; complex values as ``[re, im]``."""
        out = {}
        for n, comp in enumerate(self.components):
            table = {}
            for alpha, c in zip(comp.multisets, comp.coeffs):
                key = ",".join(str(int(i)) for i in alpha)
                table[key] = [float(c.real), float(c.imag)] if np.iscomplexobj(c) else float(c)
            out[str(n)] = table
        return out


def fock_apply(A, v: FockVector) -> FockVector:
    """Second quantisation: apply ``A^{(.)n}`` to every degree-n component of ``v``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[1] != v.dim:
        raise ValueError(f"map of shape {A.shape} cannot act on Fock space over R^{v.dim}")
    return FockVector(A.shape[0], tuple(apply_lift(A, c) for c in v.components))
