"""Exact-arithmetic helpers: certified log/exp bounds, dyadic checks, word arrays."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

import numpy as np

PLUS = "+"
MINUS = "-"

_PREC_BITS = 120


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError(f"refusing float {x!r}; pass an int, Fraction or 'p/q' string")
    return Fraction(x)


def _round_down(x: Fraction, bits: int = _PREC_BITS) -> Fraction:
    scale = 1 << bits
    return Fraction((x.numerator * scale) // x.denominator, scale)


def _round_up(x: Fraction, bits: int = _PREC_BITS) -> Fraction:
    scale = 1 << bits
    return Fraction(-((-x.numerator * scale) // x.denominator), scale)


def _artanh_series_bounds(y: Fraction, terms: int) -> tuple[Fraction, Fraction]:
    # 2*artanh(y) = 2 * sum y^(2k+1)/(2k+1); tail bounded by a geometric series.
    s = Fraction(0)
    p = y
    y2 = y * y
    for k in range(terms):
        s += p / (2 * k + 1)
        p *= y2
    tail = 2 * abs(p) / ((2 * terms + 1) * (1 - y2))
    return 2 * s - tail, 2 * s + tail


@lru_cache(maxsize=None)
def _log2_bounds() -> tuple[Fraction, Fraction]:
    lo, hi = _artanh_series_bounds(Fraction(1, 3), 45)
    return _round_down(lo), _round_up(hi)


@lru_cache(maxsize=4096)
def log_bounds(x: Fraction) -> tuple[Fraction, Fraction]:
    """Rational ``(lo, hi)`` with ``lo <= log(x) <= hi`` and ``hi - lo < 2**-90``."""
    x = as_fraction(x)
    if x <= 0:
        raise ValueError(f"log of non-positive number {x}")
    if x == 1:
        return Fraction(0), Fraction(0)
    e = x.numerator.bit_length() - x.denominator.bit_length()
    m = x / Fraction(2) ** e
    # m in (1/2, 2); pull it into [3/4, 3/2)
    if m >= Fraction(3, 2):
        m /= 2
        e += 1
    elif m < Fraction(3, 4):
        m *= 2
        e -= 1
    y = (m - 1) / (m + 1)
    mlo, mhi = _artanh_series_bounds(y, 40) if y != 0 else (Fraction(0), Fraction(0))
    l2lo, l2hi = _log2_bounds()
    if e >= 0:
        lo, hi = e * l2lo + mlo, e * l2hi + mhi
    else:
        lo, hi = e * l2hi + mlo, e * l2lo + mhi
    return _round_down(lo), _round_up(hi)


def log_lower(x) -> Fraction:
    return log_bounds(as_fraction(x))[0]


def log_upper(x) -> Fraction:
    return log_bounds(as_fraction(x))[1]


@lru_cache(maxsize=4096)
def exp_bounds(x: Fraction) -> tuple[Fraction, Fraction]:
    """Rational ``(lo, hi)`` bracketing ``exp(x)``."""
    x = as_fraction(x)
    if x < 0:
        lo, hi = exp_bounds(-x)
        return _round_down(1 / hi), _round_up(1 / lo)
    # exp(x) = exp(x/2^h)^(2^h) keeps the Taylor argument below 1/2
    h = 0
    z = x
    while z > Fraction(1, 2):
        z /= 2
        h += 1
    s = Fraction(0)
    term = Fraction(1)
    n = 40
    for k in range(n):
        s += term
        term = term * z / (k + 1)
    # remaining terms are bounded by 2 * first omitted term since z <= 1/2
    lo, hi = s, s + 2 * term
    for _ in range(h):
        lo, hi = _round_down(lo * lo), _round_up(hi * hi)
    return _round_down(lo), _round_up(hi)


def dyadic_exponent(eps) -> int:
    """Return ``e`` with ``eps == 2**-e``; raise ``ValueError`` otherwise."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    num, den = eps.numerator, eps.denominator
    if num == 1 and den & (den - 1) == 0:
        return den.bit_length() - 1
    if den == 1 and num & (num - 1) == 0:
        return -(num.bit_length() - 1)
    raise ValueError(f"epsilon must be a power of two, got {eps}")


def word_signs(word: str) -> np.ndarray:
    """+1 / -1 int64 array for a word over ``{'+', '-'}``."""
    raw = np.frombuffer(word.encode("ascii"), dtype=np.uint8)
    if raw.size and not np.all((raw == 43) | (raw == 45)):
        raise ValueError("word must use only '+' and '-'")
    return np.where(raw == 43, 1, -1).astype(np.int64)


def word_bits(word: str) -> np.ndarray:
    """1 for '+', 0 for '-' as uint8."""
    return (np.frombuffer(word.encode("ascii"), dtype=np.uint8) == 43).astype(np.uint8)


def signed_count(word: str) -> int:
    """#Plus - #Minus."""
    p = word.count(PLUS)
    return 2 * p - len(word)


def cyclic_extend(word: str, start: int, length: int) -> str:
    """``length`` symbols of the bi-infinite periodic word ``word^Z`` from index ``start``."""
    n = len(word)
    if n == 0:
        raise ValueError("empty word")
    s = start % n
    reps = (s + length) // n + 1
    return (word * reps)[s : s + length]


def primitive_root(word: str) -> str:
    """Shortest ``u`` with ``word == u * k``."""
    i = (word + word).find(word, 1)
    return word[:i] if i < len(word) else word


def flip(sym: str) -> str:
    return MINUS if sym == PLUS else PLUS


def frac_json(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


def common_denominator(*xs: Fraction) -> int:
    d = 1
    for x in xs:
        d = d * x.denominator // gcd(d, x.denominator)
    return d


def two_valued_prefix(word: str, plus_val: Fraction, minus_val: Fraction) -> tuple[np.ndarray, int]:
    """Prefix sums ``P[0..n]`` of ``plus_val``/``minus_val`` along ``word``, scaled by an
    integer ``D`` so they are exact integers.  Returns ``(P * D, D)``; the array is
    int64 when that cannot overflow and Python ints otherwise."""
    D = common_denominator(plus_val, minus_val)
    pv, mv = int(plus_val * D), int(minus_val * D)
    n = len(word)
    if n * max(abs(pv), abs(mv), 1) < 2**62:
        vals = np.where(word_bits(word) == 1, pv, mv).astype(np.int64)
    else:
        bits = word_bits(word) == 1
        vals = np.empty(n, dtype=object)
        vals[bits] = pv
        vals[~bits] = mv
    out = np.zeros(n + 1, dtype=vals.dtype)
    np.cumsum(vals, out=out[1:])
    return out, D


_PREFIX_CHUNK = 1 << 22


def two_valued_prefix_chunks(word: str, plus_val: Fraction, minus_val: Fraction, chunk: int = _PREFIX_CHUNK):
    """``(D, chunks)`` where ``chunks`` yields ``(k0, P)`` with ``P[j] = D * sum_{i <= k0 + j}``
    of the values; the memory-lean form of ``two_valued_prefix`` for long words."""
    D = common_denominator(plus_val, minus_val)
    pv, mv = int(plus_val * D), int(minus_val * D)
    n = len(word)
    small = n * max(abs(pv), abs(mv), 1) < 2**62

    def gen():
        carry = 0
        for k0 in range(0, n, chunk):
            bits = word_bits(word[k0 : k0 + chunk]) == 1
            if small:
                vals = np.where(bits, pv, mv).astype(np.int64)
            else:
                vals = np.empty(bits.size, dtype=object)
                vals[bits] = pv
                vals[~bits] = mv
            vals[0] += carry
            P = np.cumsum(vals)
            carry = P[-1]
            yield k0, P

    return D, gen()
