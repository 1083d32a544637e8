from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest

from flipflop_ergodic.analysis import OrbitSegment, PseudoOrbit, check_quasi_string
from flipflop_ergodic.model import AffineSkewModel, EventuallyPeriodicPoint as P
from flipflop_ergodic.model import SymbolicModel, distance
from flipflop_ergodic.shadowing import (
    ShadowingError,
    fiber_prefix_rate,
    shadow_fiber,
    shadow_symbolic,
    shadowing_constants,
)

MODEL = SymbolicModel()
LAM = Fraction(-1, 8)


def direct_sup(po, orbit):
    worst = Fraction(0)
    for seg, T in zip(po.segments, po.starts):
        for s in range(seg.length):
            worst = max(worst, distance(orbit.shift(T + s), seg.start.shift(s)))
    return worst


def random_string(rng, lam, max_len=12):
    while True:
        n = rng.randint(1, max_len)
        w = "".join("+" if rng.random() < 0.3 else "-" for _ in range(n))
        if check_quasi_string(MODEL, OrbitSegment.periodic(w), lam).ok:
            return w


def test_symbolic_constants():
    c = shadowing_constants(MODEL, LAM)
    assert (c.L, c.d0) == (1, Fraction(1, 2))


def test_skew_constants_bracket_closed_form():
    c = shadowing_constants(AffineSkewModel(a_plus=2), Fraction(-1, 4))
    exact = 1 + 2 / (1 - math.exp(-0.25))
    assert c.L >= Fraction(exact) - Fraction(1, 10**12)
    assert float(c.L) == pytest.approx(exact, rel=1e-12)
    # constants for lambda stay valid for strings re-certified at lambda / 2
    assert shadowing_constants(AffineSkewModel(a_plus=2), Fraction(-1, 8)).L >= c.L


def test_shadow_spec_example():
    po = PseudoOrbit.from_words(["----", "+-+-"], 3)
    res = shadow_symbolic(po, Fraction(1, 8))
    assert res.orbit == P.periodic("----+-+-")
    assert res.period == 8
    assert res.sup_distance <= Fraction(1, 8)
    assert res.sup_distance == direct_sup(po, res.orbit)


def test_shadow_single_periodic_segment():
    po = PseudoOrbit((OrbitSegment.periodic("--+-"),))
    res = shadow_symbolic(po, Fraction(1, 2), MODEL, LAM)
    assert res.sup_distance == 0 and res.orbit == P.periodic("--+-")


def test_shadow_rejects_uncertified():
    po = PseudoOrbit.from_words(["----", "+-+-"], 3)
    with pytest.raises(ShadowingError):
        shadow_symbolic(po, Fraction(1, 8), MODEL, LAM)
    with pytest.raises(ShadowingError):
        shadow_symbolic(po, Fraction(1, 16))
    with pytest.raises(ShadowingError):
        shadow_symbolic(po, Fraction(1))


def test_shadow_exhaustive_small_words():
    # every pair of certified words of length <= 5, glued at depth 3
    words = [
        "".join(t)
        for n in range(1, 6)
        for t in itertools.product("+-", repeat=n)
        if check_quasi_string(MODEL, OrbitSegment.periodic("".join(t)), LAM).ok
    ]
    for a, b in itertools.product(words, repeat=2):
        po = PseudoOrbit.from_words([a, b], 3)
        res = shadow_symbolic(po, Fraction(1, 8), MODEL, LAM)
        assert res.sup_distance <= Fraction(1, 8)
        assert res.sup_distance == direct_sup(po, res.orbit)
        assert res.period == len(a) + len(b)


def test_shadow_random_certified():
    rng = random.Random(2024)
    for _ in range(100):
        m = rng.randint(2, 6)
        words = [random_string(rng, LAM) for _ in range(rng.randint(1, 4))]
        po = PseudoOrbit.from_words(words, m)
        d = Fraction(1, 2**m)
        res = shadow_symbolic(po, d, MODEL, LAM)
        assert res.sup_distance <= d
        assert res.period == po.period == sum(map(len, words))
        assert res.sup_distance == direct_sup(po, res.orbit)


def test_shadow_with_foreign_tails():
    # segment points whose tails disagree with the glued orbit
    x0 = P("+", "---" + "--", "+", 0)
    x1 = P("+", "-" + "---" + "-", "+", 1)
    po = PseudoOrbit((OrbitSegment(x0, 3), OrbitSegment(x1, 3)))
    d = max(po.jumps())
    res = shadow_symbolic(po, d)
    assert res.sup_distance == direct_sup(po, res.orbit) <= d


def test_fiber_examples():
    m = AffineSkewModel(a_plus=2, b_plus=0, a_minus=Fraction(1, 2), b_minus=0)
    res = shadow_fiber(m, PseudoOrbit((OrbitSegment.periodic("-"),)), Fraction(1, 2))
    assert res.orbit.fiber == 0 and res.residual == 0
    m = AffineSkewModel(a_plus=2, b_plus=0, a_minus=Fraction(1, 2), b_minus=Fraction(1, 2))
    res = shadow_fiber(m, PseudoOrbit((OrbitSegment.periodic("--+"),)), Fraction(1, 2))
    assert res.orbit.fiber == 3
    with pytest.raises(ShadowingError, match="uncertifiable"):
        shadow_fiber(m, PseudoOrbit((OrbitSegment.periodic("+-"),)), Fraction(1, 2))


def test_fiber_random_zero_residual_and_bound():
    rng = random.Random(99)
    m = AffineSkewModel(a_plus=2, b_plus=Fraction(1, 3), a_minus=Fraction(1, 2), b_minus=Fraction(1, 2))
    lam = Fraction(-1, 8)
    L = shadowing_constants(m, lam).L
    done = 0
    while done < 100:
        words = [random_string(rng, lam, 10) for _ in range(rng.randint(1, 3))]
        if any(fiber_prefix_rate(m, w) > lam for w in words):
            continue
        depth = rng.randint(2, 6)
        d = Fraction(1, 2**depth)
        po = PseudoOrbit.from_words(words, depth)
        res = shadow_fiber(m, po, d, lam)
        A, B = m.compose(po.word)
        assert A * res.orbit.fiber + B == res.orbit.fiber
        assert res.residual == 0
        # pseudo fibers: true fibers perturbed by at most d at each segment start
        theta, fibers = res.orbit.fiber, []
        for w in words:
            fibers.append(theta + Fraction(rng.randint(-8, 8), 8) * d)
            a, b = m.compose(w)
            theta = a * theta + b
        po2 = PseudoOrbit(po.segments, True, tuple(fibers))
        res2 = shadow_fiber(m, po2, d, lam)
        assert res2.fiber_sup_distance <= L * d
        done += 1
