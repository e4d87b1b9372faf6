"""Skew maps between pairs of laws and their convolution factors.

A linear ``T: R^d1 -> R^d2`` is a skew map for ``(mu1, mu2)`` when
``T(mu1) * rho = mu2`` for some probability measure ``rho``; since the
characteristic function of ``mu2`` never vanishes, ``rho`` is unique.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import (
    AtomicLevyMeasure,
    CharFn,
    CompoundPoissonLaw,
    GaussianLaw,
    char_fn,
    pushforward_charfn,
)

PSD_DECISION_TOL = 1e-9
CONTRACTION_TOL = 1e-12
SNAP_TOL = 1e-9
JUMP_WEIGHT_TOL = 1e-12


class NotASkewMap(ValueError):
    """The residual covariance / Levy measure is not a valid law."""

    def __init__(self, message: str, lambda_min: float | None = None):
        super().__init__(message)
        self.lambda_min = lambda_min


class AtomMismatch(ValueError):
    """A pushed-forward atom has no counterpart in the target Levy measure."""


class NotAContraction(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SkewTriple:
    """``T`` with source/target laws and the skew convolution factor ``rho``.

    ``residual`` is ``R = Q2 - T Q1 T^T`` in the Gaussian case (``None`` for
    jump laws) and ``lambda_min`` its smallest eigenvalue before clipping.
    """

    T: np.ndarray
    mu1: GaussianLaw | CompoundPoissonLaw
    mu2: GaussianLaw | CompoundPoissonLaw
    rho: GaussianLaw | CompoundPoissonLaw | CharFn
    residual: np.ndarray | None = None
    lambda_min: float | None = None

    @property
    def kind(self) -> str:
        return "gaussian" if isinstance(self.mu2, GaussianLaw) else "jump"

    def to_report(self) -> dict:
        out = {"kind": self.kind, "T": self.T.tolist()}
        if self.residual is not None:
            out["R"] = self.residual.tolist()
            out["lambda_min_R"] = self.lambda_min
        else:
            out["rho_shift"] = self.rho.shift.tolist()
            out["rho_atoms"] = self.rho.levy.atoms.tolist()
            out["rho_weights"] = self.rho.levy.weights.tolist()
        return out


def _as_matrix(T, d1: int, d2: int) -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape != (d2, d1):
        raise ValueError(f"T must have shape ({d2}, {d1}), got {T.shape}")
    return T


def skew_identity_residual(triple: SkewTriple, probes: int = 100, rng=None, scale: float = 1.0) -> float:
    """Max over random probes of ``|T(mu1)^ rho^ - mu2^|``."""
    rng = np.random.default_rng(0) if rng is None else rng
    u = scale * rng.standard_normal((probes, triple.mu2.dim))
    lhs = pushforward_charfn(triple.mu1, triple.T).fn(u) * char_fn(triple.rho).fn(u)
    rhs = char_fn(triple.mu2).fn(u)
    return float(np.max(np.abs(lhs - rhs)))


def residual_covariance(T, mu1: GaussianLaw, mu2: GaussianLaw) -> tuple[np.ndarray, float]:
    T = _as_matrix(T, mu1.dim, mu2.dim)
    R = mu2.cov - T @ mu1.cov @ T.T
    R = 0.5 * (R + R.T)
    return R, float(np.linalg.eigvalsh(R)[0])


def build_skew_factor(T, mu1: GaussianLaw, mu2: GaussianLaw) -> SkewTriple:
    """Gaussian skew factor: ``rho = N(0, R)`` with ``R = Q2 - T Q1 T^T``."""
    T = _as_matrix(T, mu1.dim, mu2.dim)
    R, lam_min = residual_covariance(T, mu1, mu2)
    if lam_min < -PSD_DECISION_TOL:
        raise NotASkewMap(
            f"Q2 - T Q1 T^T has negative eigenvalue {lam_min:.6g}; T is not a skew map", lam_min
        )
    lam, vec = np.linalg.eigh(R)
    R_psd = (vec * np.clip(lam, 0.0, None)) @ vec.T
    R_psd = 0.5 * (R_psd + R_psd.T)
    return SkewTriple(T, mu1, mu2, GaussianLaw(R_psd), residual=R, lambda_min=lam_min)


def build_skew_factor_jump(
    T, mu1: CompoundPoissonLaw, mu2: CompoundPoissonLaw, verify_probes: int = 100
) -> SkewTriple:
    """Jump-law skew factor by atom-wise subtraction ``nu_rho = nu2 - T(nu1)``.

    Image atoms ``T y_j = 0`` contribute only to the shift.  The shift of
    ``rho`` is chosen so that ``T(mu1)^ * rho^ = mu2^`` holds exactly.
    """
    T = _as_matrix(T, mu1.dim, mu2.dim)
    image = mu1.pushforward(T)
    target_atoms = mu2.levy.atoms
    weights = mu2.levy.weights.copy()
    for y, w in zip(image.levy.atoms, image.levy.weights):
        dist = np.linalg.norm(target_atoms - y, axis=1) if len(target_atoms) else np.array([])
        k = int(np.argmin(dist)) if dist.size else -1
        if k < 0 or dist[k] > SNAP_TOL:
            raise AtomMismatch(f"pushed-forward atom {y.tolist()} is not an atom of the target Levy measure")
        weights[k] -= w
    if np.any(weights < -JUMP_WEIGHT_TOL):
        k = int(np.argmin(weights))
        raise NotASkewMap(
            f"residual Levy weight {weights[k]:.6g} at atom {target_atoms[k].tolist()} is negative",
            float(weights[k]),
        )
    keep = weights > JUMP_WEIGHT_TOL
    levy = AtomicLevyMeasure(target_atoms[keep], weights[keep], dim=mu2.dim)
    # offset_rho = offset_2 - offset_image, and shift = offset + compensator
    shift = mu2.offset - image.offset + levy.compensator
    rho = CompoundPoissonLaw(shift, levy)
    triple = SkewTriple(T, mu1, mu2, rho)
    if verify_probes:
        res = skew_identity_residual(triple, verify_probes)
        if res > 1e-9:
            raise AtomMismatch(f"characteristic-function identity fails after snapping (residual {res:.3e})")
    return triple


def skew_factor(T, mu1, mu2) -> SkewTriple:
    """Dispatch on the law class of the pair."""
    if isinstance(mu1, GaussianLaw) and isinstance(mu2, GaussianLaw):
        return build_skew_factor(T, mu1, mu2)
    if isinstance(mu1, CompoundPoissonLaw) and isinstance(mu2, CompoundPoissonLaw):
        return build_skew_factor_jump(T, mu1, mu2)
    raise TypeError("mu1 and mu2 must both be Gaussian or both compound Poisson")


def restrict_to_rkhs(T, mu1: GaussianLaw, mu2: GaussianLaw) -> np.ndarray:
    """Matrix ``M`` of ``T|_{H1}: H1 -> H2`` in factor coordinates, i.e. ``j2 M = T j1``."""
    triple = build_skew_factor(T, mu1, mu2)
    return np.linalg.pinv(mu2.factor) @ triple.T @ mu1.factor


def extend_contraction(M, mu1: GaussianLaw, mu2: GaussianLaw) -> SkewTriple:
    """Realise a contraction ``M: H1 -> H2`` as a skew operator ``j2 M j1^+`` on the ambient spaces."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (mu2.rank, mu1.rank):
        raise ValueError(f"M must have shape ({mu2.rank}, {mu1.rank}), got {M.shape}")
    norm = float(np.linalg.norm(M, 2)) if M.size else 0.0
    if norm > 1.0 + CONTRACTION_TOL:
        raise NotAContraction(f"spectral norm {norm:.12g} exceeds 1")
    T = mu2.factor @ M @ np.linalg.pinv(mu1.factor) if M.size else np.zeros((mu2.dim, mu1.dim))
    return build_skew_factor(T, mu1, mu2)


def check_self_decomposable(T, mu) -> SkewTriple:
    """``mu = T(mu) * rho``: skew factor for the pair ``(mu, mu)``."""
    return skew_factor(T, mu, mu)


def verify_semigroup_law(
    S: Callable[[float], np.ndarray],
    mus: Callable[[float], object],
    s: float,
    t: float,
    probes: int = 50,
    rng=None,
    scale: float = 1.0,
) -> float:
    """Max over probes of ``|mu_{s+t}^(x*) - mu_s^(S(t)^T x*) mu_t^(x*)|``."""
    rng = np.random.default_rng(0) if rng is None else rng
    cf_st, cf_s, cf_t = char_fn(mus(s + t)), char_fn(mus(s)), char_fn(mus(t))
    u = scale * rng.standard_normal((probes, cf_st.dim))
    St = np.atleast_2d(S(t))
    lhs = cf_st.fn(u)
    rhs = cf_s.fn(u @ St) * cf_t.fn(u)
    return float(np.max(np.abs(lhs - rhs)))
