"""Periodic measures as exact cylinder-frequency tables, centre exponents,
a cylinder weak* metric, Hausdorff distance of orbit sets and word complexity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from ._exact import MINUS, PLUS, cyclic_extend, word_bits
from .model import SymbolicModel

_CHUNK = 62


def window_codes(word: str, m: int, start: int = 0, count: int | None = None) -> np.ndarray:
    """Integer codes (``+`` = 1, most significant first) of the cyclic length-``m``
    windows of ``word`` starting at ``start, start+1, ...``; ``m <= 62``."""
    if not 1 <= m <= _CHUNK:
        raise ValueError("window length must be in 1..62")
    n = len(word)
    count = n if count is None else count
    dt = np.uint8 if m <= 8 else np.uint16 if m <= 16 else np.uint32 if m <= 32 else np.int64
    bits = word_bits(cyclic_extend(word, start, count + m - 1)).astype(dt)
    codes = np.zeros(count, dtype=dt)
    for j in range(m):
        codes <<= 1
        codes |= bits[j : j + count]
    return codes


def _code_word(code: int, m: int) -> str:
    return "".join(PLUS if (code >> (m - 1 - j)) & 1 else MINUS for j in range(m))


def all_words(m: int) -> list[str]:
    return ["".join(w) for w in itertools.product(PLUS + MINUS, repeat=m)]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Cylinder frequencies of a periodic orbit for all words of length ``1..M``."""

    period: int
    freq: dict
    M: int

    def __getitem__(self, w: str) -> Fraction:
        if not 1 <= len(w) <= self.M:
            raise KeyError(f"frequency depth is {self.M}")
        return self.freq.get(w, Fraction(0))

    def check(self) -> list[str]:
        """Normalisation, consistency and positivity problems (empty when sound)."""
        out = []
        for m in range(1, self.M + 1):
            ws = all_words(m)
            if sum(self[w] for w in ws) != 1:
                out.append(f"length-{m} frequencies do not sum to 1")
            if any(self[w] < 0 for w in ws):
                out.append(f"negative length-{m} frequency")
            if m < self.M:
                for w in ws:
                    if self[w] != self[w + PLUS] + self[w + MINUS]:
                        out.append(f"inconsistent frequency at {w}")
                        break
        return out


def empirical_measure(orbit: str, M: int) -> EmpiricalMeasure:
    """``freq(w) = #{cyclic occurrences of w} / period`` for ``|w| <= M``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if not orbit:
        raise ValueError("empty orbit")
    p = len(orbit)
    freq = {}
    for m in range(1, M + 1):
        counts = np.bincount(window_codes(orbit, m), minlength=2**m)
        for code, c in enumerate(counts):
            freq[_code_word(code, m)] = Fraction(int(c), p)
    return EmpiricalMeasure(p, freq, M)


def center_exponent(model: SymbolicModel, measure_or_orbit) -> Fraction:
    """``int phi d mu = beta (freq(+) - freq(-))``."""
    if isinstance(measure_or_orbit, str):
        return model.birkhoff_average(measure_or_orbit)
    mu = measure_or_orbit
    return model.beta * (mu[PLUS] - mu[MINUS])


def weak_star_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, M: int) -> Fraction:
    """``sum_{m<=M} 2^-m max_{|w|=m} |mu(w) - nu(w)|``."""
    if mu.M < M or nu.M < M:
        raise ValueError(f"measures carry depth {mu.M}, {nu.M} < {M}")
    total = Fraction(0)
    for m in range(1, M + 1):
        total += Fraction(1, 2**m) * max(abs(mu[w] - nu[w]) for w in all_words(m))
    return total


# ---------------------------------------------------------------------------
# orbit sets


@dataclass(frozen=True)
class OrbitSetApprox:
    """Points of the periodic orbits of ``words`` seen through coordinates ``[-depth, depth]``."""

    words: frozenset
    depth: int = 16

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(self.words))
        if not self.words:
            raise ValueError("need at least one orbit word")
        if not 0 <= self.depth <= 30:
            raise ValueError("depth must lie in 0..30")

    def windows(self) -> np.ndarray:
        """Distinct codes of the central ``2*depth+1`` windows of every orbit point."""
        D = self.depth
        codes = [window_codes(w, 2 * D + 1, start=-D).astype(np.int64) for w in sorted(self.words)]
        return np.unique(np.concatenate(codes))


def _central(codes: np.ndarray, D: int, r: int) -> np.ndarray:
    """Restrict ``2D+1`` window codes to their central ``2r+1`` coordinates."""
    return (codes >> (D - r)) & ((1 << (2 * r + 1)) - 1)


def _one_sided(A: np.ndarray, B: np.ndarray, D: int) -> Fraction:
    """``max_{a in A} min_{b in B} d(a, b)`` in the depth-``D`` truncated metric."""
    # radius[i]: largest r with a_i agreeing with some b on [-r, r], -1 if none
    radius = np.full(A.size, -1, dtype=np.int64)
    for r in range(D + 1):
        hit = np.isin(_central(A, D, r), _central(B, D, r))
        radius[hit] = r
        if not hit.any():
            break
    worst = int(radius.min())
    if worst >= D:
        return Fraction(0)
    return Fraction(1, 2 ** (worst + 1))


def hausdorff_distance(A: OrbitSetApprox, B: OrbitSetApprox) -> Fraction:
    """Two-sided Hausdorff distance between the orbit point sets."""
    D = min(A.depth, B.depth)
    wa = OrbitSetApprox(A.words, D).windows()
    wb = OrbitSetApprox(B.words, D).windows()
    return max(_one_sided(wa, wb, D), _one_sided(wb, wa, D))


# ---------------------------------------------------------------------------
# complexity


def factor_set_codes(words: Iterable[str], n: int) -> np.ndarray:
    """Distinct length-``n`` cyclic factors, as rows of up-to-62-bit chunk codes."""
    rows = []
    for w in words:
        chunks = []
        for off in range(0, n, _CHUNK):
            m = min(_CHUNK, n - off)
            chunks.append(window_codes(w, m, start=off, count=len(w)).astype(np.int64))
        rows.append(np.stack(chunks, axis=1))
    if not rows:
        return np.zeros((0, 1), dtype=np.int64)
    return np.unique(np.concatenate(rows), axis=0)


def word_complexity(words: Iterable[str], n: int) -> int:
    """Number of distinct length-``n`` factors across the cyclically extended words."""
    if n < 1:
        raise ValueError("n must be positive")
    return int(factor_set_codes(list(words), n).shape[0])


def factors(words: Iterable[str], n: int) -> set[str]:
    """Distinct length-``n`` cyclic factors as strings (small inputs)."""
    out = set()
    for w in words:
        ext = cyclic_extend(w, 0, len(w) + n - 1)
        out.update(ext[i : i + n] for i in range(len(w)))
    return out


def complexity_entropy_proxy(words: Iterable[str], n: int) -> Fraction:
    """``floor(log2(word_complexity)) / n``, an exact lower bound for ``log2(count) / n``."""
    c = word_complexity(words, n)
    return Fraction(c.bit_length() - 1, n)
