"""Combinatorial certificates: Pliss times, bi-hyperbolic times, (beta, t, T)-control,
lambda-quasi-hyperbolic strings and pseudo-orbit validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

from ._exact import (
    MINUS,
    PLUS,
    as_fraction,
    cyclic_extend,
    flip,
    log_lower,
    log_upper,
    two_valued_prefix,
    two_valued_prefix_chunks,
)
from .model import EventuallyPeriodicPoint, SymbolicModel, distance


# ---------------------------------------------------------------------------
# Pliss times


def pliss_times(seq: Sequence, A, c, c_prime) -> list[int]:
    """All 1-indexed ``t`` with ``sum(seq[j..t]) >= (t - j + 1) * c_prime`` for every ``j <= t``.

    Raises ``ValueError`` when a hypothesis of the counting lemma fails.
    """
    A, c, c_prime = as_fraction(A), as_fraction(c), as_fraction(c_prime)
    xs = [as_fraction(v) for v in seq]
    n = len(xs)
    if n == 0:
        raise ValueError("empty sequence")
    if not c_prime < c < A:
        raise ValueError(f"need c' < c < A, got c'={c_prime}, c={c}, A={A}")
    worst = max(xs)
    if worst > A:
        raise ValueError(f"entry {worst} exceeds the upper bound A={A}")
    if sum(xs) < n * c:
        raise ValueError(f"sum {sum(xs)} is below n*c = {n * c}")
    # m is the least suffix sum of (seq - c') ending at t
    out = []
    m = Fraction(0)
    for t, v in enumerate(xs, start=1):
        m = v - c_prime + min(m, Fraction(0))
        if m >= 0:
            out.append(t)
    return out


def pliss_lower_bound(n: int, A, c, c_prime) -> Fraction:
    """Guaranteed count ``n (c - c') / (A - c')``."""
    A, c, c_prime = as_fraction(A), as_fraction(c), as_fraction(c_prime)
    return n * (c - c_prime) / (A - c_prime)


# ---------------------------------------------------------------------------
# bi-hyperbolic times


def bi_hyperbolic_time(orbit: str, lam, lam_prime, model: SymbolicModel | None = None) -> int:
    """Index ``q`` of the periodic orbit ``orbit`` at which every forward
    ``E``-average and backward ``F``-average over ``k = 1..period`` steps meets
    the rate ``lam_prime``."""
    model = model or SymbolicModel()
    lam, lam_prime = as_fraction(lam), as_fraction(lam_prime)
    if not lam < lam_prime < 0:
        raise ValueError(f"hypothesis failed: need lambda < lambda' < 0, got {lam}, {lam_prime}")
    p = len(orbit)
    avg = model.birkhoff_average(orbit)
    if avg > lam:
        raise ValueError(f"hypothesis failed: period average {avg} exceeds lambda = {lam}")
    # the reversed-orbit condition concerns F, whose log-rate is log(lambda_u) everywhere
    if log_lower(model.lambda_u) < -lam:
        raise ValueError("hypothesis failed: backward F-average log(lambda_u) below -lambda")
    top = model.phi(PLUS if PLUS in orbit else MINUS)
    if top - log_lower(model.lambda_u) > 2 * lam:
        raise ValueError("hypothesis failed: per-step domination phi - log(lambda_u) <= 2 lambda")
    e_plus, e_minus = _e_rates(model)
    P, _ = two_valued_prefix(orbit, e_plus - lam_prime, e_minus - lam_prime)
    # starting just after the last maximum of the prefix sums keeps every
    # cyclic forward partial sum non-positive
    head = P[:p]
    q = int(np.flatnonzero(head == head.max())[-1])
    if not _forward_e_ok(orbit, q, lam_prime, model):
        raise AssertionError("internal: rising-sun start failed re-validation")
    return q


def _e_rates(model: SymbolicModel) -> tuple[Fraction, Fraction]:
    """Certified upper values of ``log||Df|E||`` on the two cylinders."""
    ls = log_upper(model.lambda_s)
    return max(ls, model.beta), max(ls, -model.beta)


def _forward_e_ok(orbit: str, q: int, rate: Fraction, model: SymbolicModel) -> bool:
    e_plus, e_minus = _e_rates(model)
    word = cyclic_extend(orbit, q, len(orbit))
    P, _ = two_valued_prefix(word, e_plus - rate, e_minus - rate)
    return bool(np.all(P[1:] <= 0))


def is_bi_hyperbolic_time(orbit: str, q: int, lam_prime, model: SymbolicModel | None = None) -> bool:
    """Direct check of the forward-E and backward-F conditions at ``q``."""
    model = model or SymbolicModel()
    lam_prime = as_fraction(lam_prime)
    return _forward_e_ok(orbit, q, lam_prime, model) and log_lower(model.lambda_u) >= -lam_prime


# ---------------------------------------------------------------------------
# control


@dataclass(frozen=True)
class ControlWitness:
    """Cut times ``0 = c_0 < c_1 < ... = T`` with gaps ``<= t`` and block
    averages of absolute value ``<= beta``."""

    partition: tuple[int, ...]
    beta: Fraction
    t: int
    T: int

    def validate(self, phi_values, unit=1) -> bool:
        return validate_partition(phi_values, self.partition, self.beta, self.t, self.T, unit)


def _phi_prefix(phi_values, unit=1) -> tuple[np.ndarray | list, int]:
    """Integer prefix sums of the values and the scale they were multiplied by.

    A word over ``{+,-}`` is read as ``phi = +unit / -unit``.
    """
    if isinstance(phi_values, str):
        unit = as_fraction(unit)
        return two_valued_prefix(phi_values, unit, -unit)
    vals = [as_fraction(v) for v in phi_values]
    D = 1
    for v in vals:
        D = D * v.denominator // gcd(D, v.denominator)
    out = [0]
    for v in vals:
        out.append(out[-1] + int(v * D))
    return out, D


def validate_partition(phi_values, partition, beta, t: int, T: int, unit=1) -> bool:
    """Single-pass re-check of a control partition.

    ``phi_values`` may be a word over ``{+,-}``, read as ``phi = +-unit``.
    """
    beta = as_fraction(beta)
    cuts = np.asarray(partition, dtype=np.int64)
    if cuts.size < 2 or cuts[0] != 0 or cuts[-1] != T:
        return False
    gaps = np.diff(cuts)
    if np.any(gaps <= 0) or np.any(gaps > t):
        return False
    P, D = _phi_prefix(phi_values, unit)
    if len(P) < T + 1:
        return False
    P = np.asarray(P, dtype=object if not isinstance(P, np.ndarray) else P.dtype)
    sums = P[cuts[1:]] - P[cuts[:-1]]
    bound = beta * D
    lhs = np.abs(sums) * bound.denominator
    rhs = gaps * bound.numerator
    return bool(np.all(lhs <= rhs))


def check_control(phi_values, beta, t: int, T: int, unit=1) -> ControlWitness | None:
    """A ``(beta, t, T)``-control witness with lexicographically earliest cuts, or None.

    ``phi_values`` is a sequence of rationals or a word over ``{+,-}`` (read as ``+-unit``).
    """
    beta = as_fraction(beta)
    if t < 1 or T < 1:
        raise ValueError("t and T must be positive")
    P, D = _phi_prefix(phi_values, unit)
    if len(P) < T + 1:
        raise ValueError(f"need at least T={T} values, got {len(P) - 1}")
    P = [int(v) for v in P[: T + 1]]
    bn, bd = (beta * D).numerator, (beta * D).denominator
    # can[c]: a valid cut sequence runs from c to T
    can = bytearray(T + 1)
    can[T] = 1
    for c in range(T - 1, -1, -1):
        pc = P[c]
        for c2 in range(c + 1, min(c + t, T) + 1):
            if can[c2] and abs(P[c2] - pc) * bd <= bn * (c2 - c):
                can[c] = 1
                break
    if not can[0]:
        return None
    cuts = [0]
    c = 0
    while c < T:
        pc = P[c]
        for c2 in range(c + 1, min(c + t, T) + 1):
            if can[c2] and abs(P[c2] - pc) * bd <= bn * (c2 - c):
                cuts.append(c2)
                c = c2
                break
    return ControlWitness(tuple(cuts), beta, t, T)


# ---------------------------------------------------------------------------
# quasi-hyperbolic strings


@dataclass(frozen=True)
class OrbitSegment:
    """The orbit segment ``{x, f x, ..., f^length x}``; its itinerary word is
    the ``length`` symbols ``x_0 .. x_{length-1}``."""

    start: EventuallyPeriodicPoint
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("segment length must be positive")

    @property
    def word(self) -> str:
        return self.start.forward(self.length)

    @property
    def end(self) -> EventuallyPeriodicPoint:
        return self.start.shift(self.length)

    @classmethod
    def periodic(cls, word: str) -> "OrbitSegment":
        return cls(EventuallyPeriodicPoint.periodic(word), len(word))


@dataclass(frozen=True)
class QuasiStringCertificate:
    """Slack in the three quasi-hyperbolicity inequalities.

    Margins are produced on demand because segments may be millions of
    symbols long; ``ok`` and the minima are computed without materialising
    them.  ``log_lambda_u`` is a certified lower bound for ``log lambda_u`` and
    ``e_plus``/``e_minus`` certified upper values of ``log||Df|E||``.
    """

    lam: Fraction
    word: str
    beta: Fraction
    log_lambda_u: Fraction
    e_plus: Fraction
    e_minus: Fraction

    @property
    def length(self) -> int:
        return len(self.word)

    def _e_prefix(self):
        return two_valued_prefix(self.word, self.e_plus, self.e_minus)

    @property
    def e_margins(self) -> list[Fraction]:
        """``lam - (1/k) sum_{i<k} log||Df|E||`` for ``k = 1..n``."""
        P, D = self._e_prefix()
        return [self.lam - Fraction(int(P[k]), D * k) for k in range(1, len(self.word) + 1)]

    @property
    def f_margins(self) -> list[Fraction]:
        """``(1/(n-k)) sum_{i=k}^{n-1} log m(Df|F) + lam`` for ``k = 0..n-1``."""
        return [self.log_lambda_u + self.lam] * len(self.word)

    @property
    def dom_margins(self) -> list[Fraction]:
        """``2 lam - (phi_i - log lambda_u)`` for ``i < n``."""
        hi = 2 * self.lam - (self.beta - self.log_lambda_u)
        lo = 2 * self.lam - (-self.beta - self.log_lambda_u)
        return [hi if s == PLUS else lo for s in self.word]

    def _e_chunks(self):
        return two_valued_prefix_chunks(self.word, self.e_plus, self.e_minus)

    @property
    def e_ok(self) -> bool:
        D, chunks = self._e_chunks()
        num, den = self.lam.numerator, self.lam.denominator
        n = len(self.word)
        wide = n * (max(abs(self.e_plus), abs(self.e_minus)) * D * den + abs(num) * D) >= 2**62
        for k0, P in chunks:
            k = np.arange(k0 + 1, k0 + P.size + 1, dtype=np.int64)
            if wide:
                P, k = P.astype(object), k.astype(object)
            if not np.all(P * den <= k * (num * D)):
                return False
        return True

    @property
    def min_e_margin(self) -> Fraction:
        D, chunks = self._e_chunks()
        best, cands = None, []
        for k0, P in chunks:
            k = np.arange(k0 + 1, k0 + P.size + 1)
            approx = float(self.lam) - P.astype(float) / float(D) / k
            lo = float(approx.min())
            if best is None or lo < best:
                best = lo
            tol = best + 1e-9 * (1 + abs(best))
            idx = np.flatnonzero(approx <= tol)
            cands = [c for c in cands if c[0] <= tol]
            cands += [(float(approx[i]), k0 + int(i) + 1, int(P[i])) for i in idx.tolist()]
        return min(self.lam - Fraction(v, D * kk) for _, kk, v in cands)

    @property
    def min_f_margin(self) -> Fraction:
        return self.log_lambda_u + self.lam

    @property
    def min_dom_margin(self) -> Fraction:
        sym = PLUS if PLUS in self.word else MINUS
        return 2 * self.lam - ((self.beta if sym == PLUS else -self.beta) - self.log_lambda_u)

    @property
    def ok(self) -> bool:
        return self.min_f_margin >= 0 and self.min_dom_margin >= 0 and self.e_ok

    def failures(self) -> list[str]:
        out = []
        if not self.e_ok:
            D, chunks = self._e_chunks()
            first = None
            for k0, P in chunks:
                k = np.arange(k0 + 1, k0 + P.size + 1)
                bad = np.flatnonzero(P.astype(float) / float(D) / k > float(self.lam))
                if bad.size:
                    first = k0 + int(bad[0]) + 1
                    break
            out.append(f"E-average condition fails (first k={first}, min margin {self.min_e_margin})")
        if self.min_f_margin < 0:
            out.append(f"F-average condition fails (margin {self.min_f_margin})")
        if self.min_dom_margin < 0:
            out.append(f"domination fails (margin {self.min_dom_margin})")
        return out


def quasi_string_certificate(model: SymbolicModel, word: str, lam) -> QuasiStringCertificate:
    lam = as_fraction(lam)
    if lam >= 0:
        raise ValueError("lambda must be negative")
    e_plus, e_minus = _e_rates(model)
    return QuasiStringCertificate(lam, word, model.beta, log_lower(model.lambda_u), e_plus, e_minus)


def check_quasi_string(model: SymbolicModel, segment: OrbitSegment, lam) -> QuasiStringCertificate:
    """Evaluate the three quasi-hyperbolicity inequalities along ``segment`` at rate ``lam``."""
    return quasi_string_certificate(model, segment.word, lam)


# ---------------------------------------------------------------------------
# pseudo-orbits


@dataclass(frozen=True)
class PseudoOrbit:
    """Orbit segments ``{x_i, n_i}``; jump ``i`` is ``d(f^{n_i} x_i, x_{i+1})``
    (cyclically when ``periodic``).  ``fibers`` optionally carries a fiber
    coordinate for each segment start."""

    segments: tuple[OrbitSegment, ...]
    periodic: bool = True
    fibers: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("a pseudo-orbit needs at least one segment")
        if self.fibers is not None:
            f = tuple(as_fraction(v) for v in self.fibers)
            if len(f) != len(self.segments):
                raise ValueError("one fiber coordinate per segment")
            object.__setattr__(self, "fibers", f)

    @property
    def period(self) -> int:
        return sum(s.length for s in self.segments)

    @property
    def starts(self) -> list[int]:
        out, acc = [], 0
        for s in self.segments:
            out.append(acc)
            acc += s.length
        return out

    @property
    def word(self) -> str:
        return "".join(s.word for s in self.segments)

    def jumps(self) -> list[Fraction]:
        m = len(self.segments)
        count = m if self.periodic else m - 1
        return [
            distance(self.segments[i].end, self.segments[(i + 1) % m].start) for i in range(count)
        ]

    @classmethod
    def from_words(cls, words: Sequence[str], depth: int) -> "PseudoOrbit":
        """Glue the cyclic sequence of ``words`` so every jump is exactly ``2**-depth``.

        Segment ``i`` starts at a point that follows the cyclic concatenation on
        coordinates ``[-depth+1, n_i+depth-1]`` and leaves it at ``-depth`` and
        ``n_i+depth``.
        """
        if depth < 1:
            raise ValueError("depth must be at least 1")
        words = list(words)
        if not words or any(not w for w in words):
            raise ValueError("need nonempty words")
        full = "".join(words)
        segs = []
        start = 0
        for w in words:
            n = len(w)
            core = cyclic_extend(full, start - depth + 1, n + 2 * depth - 1)
            left = flip(cyclic_extend(full, start - depth, 1))
            right = flip(cyclic_extend(full, start + n + depth - 1 + 1, 1))
            pt = EventuallyPeriodicPoint(left, core, right, depth - 1)
            segs.append(OrbitSegment(pt, n))
            start += n
        return cls(tuple(segs), True)


@dataclass
class PseudoOrbitReport:
    certified: bool
    lam: Fraction
    d: Fraction
    jumps: list[Fraction]
    segment_ok: list[bool]
    failures: list[str] = field(default_factory=list)
    period: int | None = None


def validate_pseudo_orbit(model: SymbolicModel, po: PseudoOrbit, lam, d) -> PseudoOrbitReport:
    """Certify that every segment is a ``lam``-quasi-hyperbolic string and every jump is ``<= d``."""
    lam, d = as_fraction(lam), as_fraction(d)
    seg_ok = []
    fails = []
    for i, s in enumerate(po.segments):
        cert = check_quasi_string(model, s, lam)
        seg_ok.append(cert.ok)
        fails += [f"segment {i}: {msg}" for msg in cert.failures()]
    jumps = po.jumps()
    for i, j in enumerate(jumps):
        if j > d:
            fails.append(f"jump {i}: distance {j} exceeds d = {d}")
    return PseudoOrbitReport(
        certified=not fails,
        lam=lam,
        d=d,
        jumps=jumps,
        segment_ok=seg_ok,
        failures=fails,
        period=po.period if po.periodic else None,
    )
