"""Exactly computable model systems: the two-sided full shift on {+,-} with a
+/-beta centre cocycle, and an affine skew product over it."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import (
    MINUS,
    PLUS,
    as_fraction,
    cyclic_extend,
    log_lower,
    primitive_root,
    signed_count,
)


class Symbol(str, enum.Enum):
    PLUS = PLUS
    MINUS = MINUS

    def flipped(self) -> "Symbol":
        return Symbol.MINUS if self is Symbol.PLUS else Symbol.PLUS


def _check_word(word: str, name: str, allow_empty: bool = False) -> str:
    if not isinstance(word, str):
        word = "".join(Symbol(s).value for s in word)
    if not word and not allow_empty:
        raise ValueError(f"{name} must be a nonempty word")
    if word.strip("+-"):
        raise ValueError(f"{name} must use only '+' and '-': {word[:40]!r}")
    return word


def _mismatch(a: str, b: str) -> np.ndarray:
    """Indices where two equal-length words differ."""
    x = np.frombuffer(a.encode("ascii"), dtype=np.uint8)
    y = np.frombuffer(b.encode("ascii"), dtype=np.uint8)
    return np.flatnonzero(x != y)


_CHUNK = 1 << 20


def first_mismatch(a: str, b: str) -> int | None:
    """Least index where two equal-length words differ, scanning in chunks."""
    for lo in range(0, len(a), _CHUNK):
        hi = lo + _CHUNK
        if a[lo:hi] != b[lo:hi]:
            return lo + int(_mismatch(a[lo:hi], b[lo:hi])[0])
    return None


def last_mismatch(a: str, b: str) -> int | None:
    """Greatest index where two equal-length words differ, scanning in chunks."""
    for hi in range(len(a), 0, -_CHUNK):
        lo = max(0, hi - _CHUNK)
        if a[lo:hi] != b[lo:hi]:
            return lo + int(_mismatch(a[lo:hi], b[lo:hi])[-1])
    return None


@dataclass(frozen=True)
class EventuallyPeriodicPoint:
    """A point of {+,-}^Z given by ``left_period^inf . core . right_period^inf``.

    Coordinate ``i`` of the point sits at position ``i + origin`` of the
    concatenation, where position 0 is the first core symbol.  Construction
    normalises to a canonical form, so ``==`` and ``hash`` compare the
    bi-infinite sequences.
    """

    left_period: str
    core: str
    right_period: str
    origin: int = 0
    _raw: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self._raw:
            return
        left = primitive_root(_check_word(self.left_period, "left_period"))
        right = primitive_root(_check_word(self.right_period, "right_period"))
        core = _check_word(self.core, "core", allow_empty=True)
        origin = int(self.origin)
        lc, p, r = len(core), len(left), len(right)
        span = p + r

        def seg(lo: int, hi: int) -> str:
            return _concat_segment(left, core, right, lo, hi)

        # a: first position where the left-periodic continuation fails
        fwd = seg(0, lc + span)
        ref = cyclic_extend(left, 0, len(fwd))
        a = first_mismatch(fwd, ref)
        if a is None:
            # the whole sequence is left-periodic: purely periodic point
            w = cyclic_extend(left, origin, p)
            self._set(w, "", w, 0)
            return
        # b: one past the last position where the right-periodic continuation fails
        bwd = seg(-span, lc)
        ref = cyclic_extend(right, -span - lc, len(bwd))
        last = last_mismatch(bwd, ref)
        b = last - span + 1 if last is not None else -span
        c = max(a, b)
        self._set(seg(a - p, a), seg(a, c), seg(c, c + r), origin - a)

    def _set(self, left, core, right, origin):
        object.__setattr__(self, "left_period", left)
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "right_period", right)
        object.__setattr__(self, "origin", origin)

    # constructors -----------------------------------------------------
    @classmethod
    def periodic(cls, word: str, phase: int = 0) -> "EventuallyPeriodicPoint":
        """The point ``word^Z`` whose coordinate 0 is ``word[phase]``."""
        word = _check_word(word, "word")
        return cls(word, "", word, phase)

    @classmethod
    def constant(cls, sym: str = MINUS) -> "EventuallyPeriodicPoint":
        return cls(sym, "", sym, 0)

    # queries -----------------------------------------------------------
    @property
    def is_periodic(self) -> bool:
        return not self.core and self.left_period == self.right_period and self.origin == 0

    @property
    def period(self) -> int | None:
        return len(self.right_period) if self.is_periodic else None

    def __getitem__(self, i: int) -> str:
        pos = i + self.origin
        if pos < 0:
            return self.left_period[pos % len(self.left_period)]
        if pos < len(self.core):
            return self.core[pos]
        return self.right_period[(pos - len(self.core)) % len(self.right_period)]

    def window(self, lo: int, hi: int) -> str:
        """Coordinates ``lo .. hi-1`` as a word."""
        return _concat_segment(
            self.left_period, self.core, self.right_period, lo + self.origin, hi + self.origin
        )

    def forward(self, n: int) -> str:
        """Coordinates ``0 .. n-1``."""
        return self.window(0, n)

    def shift(self, k: int) -> "EventuallyPeriodicPoint":
        """``sigma^k`` of this point."""
        if self.is_periodic:
            p = len(self.right_period)
            w = cyclic_extend(self.right_period, k, p)
            return EventuallyPeriodicPoint(w, "", w, 0, _raw=True)
        return EventuallyPeriodicPoint(
            self.left_period, self.core, self.right_period, self.origin + k, _raw=True
        )

    def _support_radius(self) -> int:
        lo = -self.origin - len(self.left_period)
        hi = len(self.core) - self.origin + len(self.right_period)
        return max(abs(lo), abs(hi))

    def safe_radius(self, other: "EventuallyPeriodicPoint") -> int:
        """Radius beyond which two points that agree on ``[-r, r]`` agree everywhere."""
        tails = (len(self.left_period) + len(self.right_period)
                 + len(other.left_period) + len(other.right_period))
        return max(self._support_radius(), other._support_radius()) + tails + 1

    def agreement_radius(self, other: "EventuallyPeriodicPoint", limit: int | None = None) -> int | None:
        """``min{|i| : x_i != y_i}``, or None if the points agree on every
        coordinate (or on ``[-limit, limit]`` when ``limit`` is given)."""
        r = self.safe_radius(other)
        if limit is not None:
            r = min(r, limit)
        right = first_mismatch(self.window(0, r + 1), other.window(0, r + 1))
        left = last_mismatch(self.window(-r, 0), other.window(-r, 0))
        cands = ([right] if right is not None else []) + ([r - left] if left is not None else [])
        return min(cands) if cands else None


def _concat_segment(left: str, core: str, right: str, lo: int, hi: int) -> str:
    """Positions ``lo .. hi-1`` of ``left^inf . core . right^inf``."""
    if hi <= lo:
        return ""
    lc = len(core)
    parts = []
    if lo < 0:
        e = min(hi, 0)
        parts.append(cyclic_extend(left, lo, e - lo))
    a, b = max(lo, 0), min(hi, lc)
    if a < b:
        parts.append(core[a:b])
    if hi > lc:
        s = max(lo, lc)
        parts.append(cyclic_extend(right, s - lc, hi - s))
    return "".join(parts)


def distance(p: EventuallyPeriodicPoint, q: EventuallyPeriodicPoint) -> Fraction:
    """Dyadic metric ``2**-min{|i| : p_i != q_i}``; 0 when equal."""
    k = p.agreement_radius(q)
    return Fraction(0) if k is None else Fraction(1, 2**k)


def truncated_distance(p: EventuallyPeriodicPoint, q: EventuallyPeriodicPoint, depth: int) -> Fraction:
    """Metric evaluated on coordinates ``[-depth, depth]`` only."""
    k = p.agreement_radius(q, limit=depth)
    return Fraction(0) if k is None else Fraction(1, 2**k)


@dataclass(frozen=True)
class SymbolicModel:
    """Full shift with ``phi = +beta`` on ``x_0 = +`` and ``-beta`` on ``x_0 = -``.

    ``lambda_u`` and ``lambda_s`` are the declared rates of the unstable and
    stable cocycles used by the quasi-hyperbolicity checks.
    """

    beta: Fraction = Fraction(1)
    tau: Fraction = Fraction(1, 2)
    lambda_u: Fraction = Fraction(8)
    lambda_s: Fraction = Fraction(1, 8)

    def __post_init__(self):
        for name in ("beta", "tau", "lambda_u", "lambda_s"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.beta <= 0 or self.tau <= 0:
            raise ValueError("beta and tau must be positive")
        if self.lambda_u <= 1:
            raise ValueError("lambda_u must exceed 1")
        if not 0 < self.lambda_s < 1:
            raise ValueError("lambda_s must lie in (0, 1)")

    def violations(self) -> list[str]:
        """Model invariants that fail (a perturbed model may be built on purpose)."""
        out = []
        if 2 * self.tau > self.beta:
            out.append(f"2*tau = {2 * self.tau} exceeds beta = {self.beta}")
        return out

    @property
    def phi_norm(self) -> Fraction:
        return self.beta

    @property
    def log_lambda_u_lower(self) -> Fraction:
        return log_lower(self.lambda_u)

    def phi(self, sym: str) -> Fraction:
        return self.beta if sym == PLUS else -self.beta

    def phi_sum(self, word: str) -> Fraction:
        return self.beta * signed_count(word)

    def birkhoff_average(self, word: str) -> Fraction:
        if not word:
            raise ValueError("empty word")
        return Fraction(self.beta * signed_count(word), len(word))

    def domination_ok(self, lam: Fraction) -> bool:
        """``log lambda_u >= beta + 2|lam|`` (certified via a lower log bound)."""
        return self.log_lambda_u_lower >= self.beta + 2 * abs(as_fraction(lam))


@dataclass(frozen=True)
class AffineSkewModel:
    """Skew product ``(x, theta) -> (sigma x, a_{x_0} theta + b_{x_0})``."""

    base: SymbolicModel = field(default_factory=SymbolicModel)
    a_plus: Fraction = Fraction(2)
    b_plus: Fraction = Fraction(0)
    a_minus: Fraction = Fraction(1, 2)
    b_minus: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("a_plus", "b_plus", "a_minus", "b_minus"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not (self.a_plus > 1 > self.a_minus > 0):
            raise ValueError("need a_plus > 1 > a_minus > 0 so log a_s has the sign of phi")

    def fiber_map(self, sym: str) -> tuple[Fraction, Fraction]:
        return (self.a_plus, self.b_plus) if sym == PLUS else (self.a_minus, self.b_minus)

    def compose(self, word: str) -> tuple[Fraction, Fraction]:
        """``(A, B)`` with ``g_{w[k-1]} o ... o g_{w[0]} (theta) = A theta + B``."""
        p = word.count(PLUS)
        A = self.a_plus**p * self.a_minus ** (len(word) - p)
        B = Fraction(0)
        for s in word:
            a, b = self.fiber_map(s)
            B = a * B + b
        return A, B


@dataclass(frozen=True)
class SkewState:
    base: EventuallyPeriodicPoint
    fiber: Fraction

    def __post_init__(self):
        object.__setattr__(self, "fiber", as_fraction(self.fiber))


def apply(model, point: EventuallyPeriodicPoint, k: int) -> EventuallyPeriodicPoint:
    """``f^k(point)``; the shift is invertible so ``k`` may be negative."""
    return point.shift(k)


def phi_segment(model: SymbolicModel, point: EventuallyPeriodicPoint, n: int) -> list[Fraction]:
    """``[phi(x), phi(fx), ..., phi(f^{n-1}x)]``."""
    if n < 1:
        raise ValueError("n must be positive")
    base = model.base if isinstance(model, AffineSkewModel) else model
    return [base.phi(s) for s in point.forward(n)]


def skew_apply(model: AffineSkewModel, s: SkewState, k: int) -> SkewState:
    if k < 0:
        raise ValueError("skew_apply needs k >= 0")
    A, B = model.compose(s.base.forward(k))
    return SkewState(s.base.shift(k), A * s.fiber + B)
