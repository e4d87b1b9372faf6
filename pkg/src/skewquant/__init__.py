"""Skew convolution semigroups, Mehler operators and their second quantisation."""

from .measures import AtomicLevyMeasure, CharFn, CompoundPoissonLaw, GaussianLaw
from .skew import AtomMismatch, NotAContraction, NotASkewMap, SkewTriple, skew_factor

__version__ = "0.1.0"

__all__ = [
    "AtomicLevyMeasure",
    "CharFn",
    "CompoundPoissonLaw",
    "GaussianLaw",
    "AtomMismatch",
    "NotAContraction",
    "NotASkewMap",
    "SkewTriple",
    "skew_factor",
]
