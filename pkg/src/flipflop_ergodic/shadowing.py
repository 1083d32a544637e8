"""Shadowing of periodic quasi-hyperbolic pseudo-orbits by true periodic orbits.

In the shift the shadowing orbit is the periodic concatenation of the segment
itineraries; in the affine skew product the fiber coordinate is the unique
fixed point of the composed contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._exact import PLUS, as_fraction, exp_bounds, log_upper, two_valued_prefix
from .analysis import PseudoOrbit, validate_pseudo_orbit
from .model import (
    AffineSkewModel,
    EventuallyPeriodicPoint,
    SkewState,
    SymbolicModel,
    first_mismatch,
    last_mismatch,
)


class ShadowingError(ValueError):
    """Input pseudo-orbit is outside the shadowing contract."""


@dataclass(frozen=True)
class ShadowingConstants:
    """``L`` is an exact rational upper bound for the model's shadowing constant."""

    L: Fraction
    d0: Fraction
    lam: Fraction


@dataclass(frozen=True)
class ShadowResult:
    orbit: EventuallyPeriodicPoint | SkewState
    sup_distance: Fraction
    period: int | None
    fiber_sup_distance: Fraction | None = None
    residual: Fraction | None = None


def shadowing_constants(model, lam) -> ShadowingConstants:
    lam = as_fraction(lam)
    if lam >= 0:
        raise ValueError("lambda must be negative")
    if isinstance(model, AffineSkewModel):
        # geometric series of fiber errors, each step contracting by at most e^lam
        e_hi = exp_bounds(lam)[1]
        return ShadowingConstants(1 + model.a_plus / (1 - e_hi), Fraction(1, 2), lam)
    return ShadowingConstants(Fraction(1), Fraction(1, 2), lam)


def _segment_sup(x: EventuallyPeriodicPoint, y: EventuallyPeriodicPoint, n: int) -> Fraction:
    """``max_{0<=s<n} d(f^s x, f^s y)`` in the dyadic metric."""
    if x == y:
        return Fraction(0)
    if x.window(0, n) != y.window(0, n):
        return Fraction(1)
    # mismatches beyond the safe radius cannot be nearer than those inside it
    R = x.safe_radius(y)
    cands = []
    left = last_mismatch(x.window(-R, 0), y.window(-R, 0))
    if left is not None:
        cands.append(R - left)
    right = first_mismatch(x.window(n, n + R), y.window(n, n + R))
    if right is not None:
        cands.append(right + 1)
    if not cands:
        return Fraction(0)
    return Fraction(1, 2 ** min(cands))


def pseudo_sup_distance(po: PseudoOrbit, orbit: EventuallyPeriodicPoint) -> Fraction:
    """``sup_j d(f^j(orbit), f^{j - T_i}(x_i))`` over one period."""
    worst = Fraction(0)
    for seg, T in zip(po.segments, po.starts):
        worst = max(worst, _segment_sup(seg.start, orbit.shift(T), seg.length))
    return worst


def shadow_symbolic(po: PseudoOrbit, d, model: SymbolicModel | None = None, lam=None) -> ShadowResult:
    """Periodic orbit shadowing the periodic pseudo-orbit ``po`` whose jumps are ``<= d``.

    When ``lam`` is given the segments must also certify as ``lam``-quasi-hyperbolic strings.
    """
    d = as_fraction(d)
    model = model or SymbolicModel()
    if not po.periodic:
        raise ShadowingError("only periodic pseudo-orbits are shadowed by periodic orbits")
    consts = shadowing_constants(model, lam if lam is not None else -1)
    if d > consts.d0:
        raise ShadowingError(f"jump bound d = {d} exceeds d0 = {consts.d0}")
    if lam is not None:
        rep = validate_pseudo_orbit(model, po, lam, d)
        if not rep.certified:
            raise ShadowingError("uncertified pseudo-orbit: " + "; ".join(rep.failures))
    else:
        big = [j for j in po.jumps() if j > d]
        if big:
            raise ShadowingError(f"jump {max(big)} exceeds d = {d}")
    orbit = EventuallyPeriodicPoint.periodic(po.word)
    sup = pseudo_sup_distance(po, orbit)
    if sup > consts.L * d:
        raise AssertionError(f"internal: shadowing bound violated ({sup} > {consts.L * d})")
    return ShadowResult(orbit, sup, po.period)


def fiber_prefix_rate(model: AffineSkewModel, word: str) -> Fraction:
    """Certified upper bound of ``max_k (1/k) sum_{i<k} log a_{w_i}``."""
    P, D = two_valued_prefix(word, log_upper(model.a_plus), log_upper(model.a_minus))
    k = np.arange(1, len(word) + 1)
    approx = P[1:].astype(float) / float(D) / k
    top = approx.max()
    cand = np.flatnonzero(approx >= top - 1e-9 * (1 + abs(top)))
    return max(Fraction(int(P[i + 1]), D * (int(i) + 1)) for i in cand)


def shadow_fiber(model: AffineSkewModel, po: PseudoOrbit, d, lam=None) -> ShadowResult:
    """Exact periodic skew-product orbit shadowing ``po`` (base and fiber).

    Each segment's fiber prefix averages must be ``<= lam`` (or merely negative
    when ``lam`` is omitted), which forces the composed multiplier below 1.
    """
    d = as_fraction(d)
    if not po.periodic:
        raise ShadowingError("only periodic pseudo-orbits are shadowed by periodic orbits")
    rates = [fiber_prefix_rate(model, seg.word) for seg in po.segments]
    worst = max(rates)
    if lam is not None:
        lam = as_fraction(lam)
        if worst > lam:
            raise ShadowingError(f"fiber prefix average {worst} exceeds lambda = {lam}")
    elif worst >= 0:
        raise ShadowingError(
            f"uncertifiable: fiber prefix average reaches {worst} >= 0, no lambda < 0 applies"
        )
    rate = lam if lam is not None else worst
    base = shadow_symbolic(po, d, model.base)
    word = po.word
    A, B = model.compose(word)
    if A == 1:
        raise AssertionError("internal: composed multiplier equals 1 on a certified orbit")
    theta = B / (1 - A)
    residual = A * theta + B - theta
    if residual != 0:
        raise AssertionError(f"internal: nonzero fixed-point residual {residual}")
    fiber_sup = Fraction(0)
    if po.fibers is not None:
        true_theta = theta
        for seg, th in zip(po.segments, po.fibers):
            true_theta, err = _fiber_segment_error(model, seg.word, true_theta, th)
            fiber_sup = max(fiber_sup, err)
        consts = shadowing_constants(model, rate)
        if fiber_sup > consts.L * d:
            raise AssertionError(f"internal: fiber shadowing bound violated ({fiber_sup})")
    return ShadowResult(
        SkewState(base.orbit, theta), base.sup_distance, po.period, fiber_sup, residual
    )


def _fiber_segment_error(model, word, true_theta, pseudo_theta):
    worst = abs(true_theta - pseudo_theta)
    for s in word:
        a, b = model.fiber_map(s)
        true_theta = a * true_theta + b
        pseudo_theta = a * pseudo_theta + b
        worst = max(worst, abs(true_theta - pseudo_theta))
    return true_theta, worst
