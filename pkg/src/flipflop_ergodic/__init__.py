"""Exact constructions of non-hyperbolic ergodic measures on model flip-flop systems."""

from .model import (
    AffineSkewModel,
    EventuallyPeriodicPoint,
    SkewState,
    Symbol,
    SymbolicModel,
    apply,
    distance,
    phi_segment,
    skew_apply,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSkewModel",
    "EventuallyPeriodicPoint",
    "SkewState",
    "Symbol",
    "SymbolicModel",
    "apply",
    "distance",
    "phi_segment",
    "skew_apply",
]
