from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipflop_ergodic.measures import (
    OrbitSetApprox,
    all_words,
    center_exponent,
    complexity_entropy_proxy,
    empirical_measure,
    factors,
    hausdorff_distance,
    weak_star_distance,
    word_complexity,
)
from flipflop_ergodic.model import EventuallyPeriodicPoint as P
from flipflop_ergodic.model import SymbolicModel, truncated_distance

MODEL = SymbolicModel()
orbits = st.text(alphabet="+-", min_size=1, max_size=20)


def cyclic_count(word, w):
    n = len(word)
    ext = (word * (len(w) // n + 2))
    return sum(ext[i : i + len(w)] == w for i in range(n))


def brute_hausdorff(A, B, depth):
    pa = [P.periodic(w, i) for w in A for i in range(len(w))]
    pb = [P.periodic(w, i) for w in B for i in range(len(w))]
    one = lambda X, Y: max(min(truncated_distance(x, y, depth) for y in Y) for x in X)
    return max(one(pa, pb), one(pb, pa))


def test_measure_examples():
    mu = empirical_measure("-", 2)
    assert mu["-"] == 1 and mu["--"] == 1 and mu["+"] == 0 and mu["+-"] == 0
    mu = empirical_measure("+-", 1)
    assert mu["+"] == mu["-"] == Fraction(1, 2)
    mu = empirical_measure("---+", 2)
    assert (mu["--"], mu["-+"], mu["+-"], mu["++"]) == (
        Fraction(2, 4), Fraction(1, 4), Fraction(1, 4), 0)


@given(orbits, st.integers(1, 4))
def test_measure_matches_direct_count(orbit, M):
    mu = empirical_measure(orbit, M)
    for m in range(1, M + 1):
        for w in all_words(m):
            assert mu[w] == Fraction(cyclic_count(orbit, w), len(orbit))
    assert mu.check() == []


def test_center_exponent_examples():
    assert center_exponent(MODEL, empirical_measure("-", 1)) == -1
    assert center_exponent(MODEL, "+-") == 0
    assert center_exponent(MODEL, "---+") == Fraction(-1, 2)
    assert center_exponent(MODEL, empirical_measure("---+", 3)) == Fraction(1 - 3, 4)


@given(orbits)
def test_center_exponent_equals_birkhoff(orbit):
    assert center_exponent(MODEL, empirical_measure(orbit, 1)) == MODEL.birkhoff_average(orbit)


def test_weak_star_examples():
    mu = empirical_measure("-+-", 3)
    assert weak_star_distance(mu, mu, 3) == 0
    assert weak_star_distance(empirical_measure("-", 1), empirical_measure("+-", 1), 1) == Fraction(1, 4)
    with pytest.raises(ValueError):
        weak_star_distance(empirical_measure("-", 1), empirical_measure("+-", 2), 2)


def test_weak_star_triangle_random():
    rng = random.Random(8)
    for _ in range(100):
        ms = [empirical_measure("".join(rng.choice("+-") for _ in range(rng.randint(1, 15))), 3)
              for _ in range(3)]
        d = lambda a, b: weak_star_distance(a, b, 3)
        assert d(ms[0], ms[2]) <= d(ms[0], ms[1]) + d(ms[1], ms[2])
        assert d(ms[0], ms[1]) == d(ms[1], ms[0])
        assert d(ms[0], ms[1]) <= 1 - Fraction(1, 8)


def test_hausdorff_examples():
    A = OrbitSetApprox({"-"})
    assert hausdorff_distance(A, A) == 0
    B = OrbitSetApprox({"-" * 8 + "++"})
    assert hausdorff_distance(A, B) == 1 == brute_hausdorff({"-"}, {"-" * 8 + "++"}, 16)


@given(st.sets(orbits, min_size=1, max_size=3), st.sets(orbits, min_size=1, max_size=3),
       st.integers(0, 6))
@settings(max_examples=60, deadline=None)
def test_hausdorff_matches_pairwise(A, B, depth):
    got = hausdorff_distance(OrbitSetApprox(A, depth), OrbitSetApprox(B, depth))
    assert got == brute_hausdorff(A, B, depth)


@given(st.sets(orbits, min_size=1, max_size=3), st.sets(orbits, min_size=1, max_size=3), orbits)
@settings(max_examples=40, deadline=None)
def test_hausdorff_adding_points_to_b_helps(A, B, extra):
    from flipflop_ergodic.measures import _one_sided

    D = 5
    a = OrbitSetApprox(A, D).windows()
    b1 = OrbitSetApprox(B, D).windows()
    b2 = OrbitSetApprox(B | {extra}, D).windows()
    assert _one_sided(a, b2, D) <= _one_sided(a, b1, D)


def test_complexity_examples():
    for n in range(1, 8):
        assert word_complexity(["-"], n) == 1
    assert word_complexity(["+-" * 40], 70) == 2


@given(st.lists(orbits, min_size=1, max_size=3), st.integers(1, 70))
@settings(max_examples=60, deadline=None)
def test_complexity_matches_factor_enumeration(words, n):
    assert word_complexity(words, n) == len(factors(words, n))


@given(st.lists(orbits, min_size=1, max_size=3), st.integers(1, 10))
def test_complexity_extension_bound(words, n):
    assert word_complexity(words, n + 1) <= 2 * word_complexity(words, n)
    assert complexity_entropy_proxy(words, n) * n <= word_complexity(words, n).bit_length()
