from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flipflop_ergodic._exact import exp_bounds, log_bounds
from flipflop_ergodic.model import (
    AffineSkewModel,
    EventuallyPeriodicPoint as P,
    SkewState,
    Symbol,
    SymbolicModel,
    apply,
    distance,
    phi_segment,
    skew_apply,
    truncated_distance,
)

MODEL = SymbolicModel()
words = st.text(alphabet="+-", min_size=1, max_size=7)
cores = st.text(alphabet="+-", min_size=0, max_size=10)
points = st.builds(P, words, cores, words, st.integers(-12, 12))


def naive_symbol(left, core, right, origin, i):
    pos = i + origin
    if pos < 0:
        return left[pos % len(left)]
    if pos < len(core):
        return core[pos]
    return right[(pos - len(core)) % len(right)]


def naive_distance(p, q, radius=80):
    for k in range(radius + 1):
        if p[k] != q[k] or p[-k] != q[-k]:
            return Fraction(1, 2**k)
    return Fraction(0)


def test_symbol_has_two_values():
    assert {s.value for s in Symbol} == {"+", "-"}
    assert Symbol.PLUS.flipped() is Symbol.MINUS


@given(words, cores, words, st.integers(-12, 12))
def test_canonical_form_preserves_sequence(left, core, right, origin):
    p = P(left, core, right, origin)
    for i in range(-40, 41):
        assert p[i] == naive_symbol(left, core, right, origin, i)


@given(points)
def test_canonical_form_is_idempotent(p):
    again = P(p.left_period, p.core, p.right_period, p.origin)
    assert again == p and hash(again) == hash(p)
    assert (again.left_period, again.core, again.right_period, again.origin) == (
        p.left_period, p.core, p.right_period, p.origin)


def test_equal_sequences_compare_equal():
    assert P("-", "---", "-", 5) == P.constant("-")
    assert P("+-", "+-+-", "+-", 0) == P.periodic("+-")
    assert P.periodic("+-", 1) == P.periodic("-+")
    assert P("-", "+", "-", 0) != P("-", "+", "-", 1)


def test_apply_fixed_point():
    q = P.constant("-")
    assert apply(MODEL, q, 5) == q


def test_apply_moves_origin():
    p = P("-", "+", "-", 0)
    s = apply(MODEL, p, 1)
    assert s.core == "+" and s.origin == p.origin + 1
    assert s[-1] == "+"


def test_apply_roundtrip_random():
    rng = random.Random(7)
    for _ in range(100):
        rw = lambda n: "".join(rng.choice("+-") for _ in range(n))
        p = P(rw(rng.randint(1, 5)), rw(rng.randint(0, 8)), rw(rng.randint(1, 5)), rng.randint(-6, 6))
        back = apply(MODEL, apply(MODEL, p, 3), -3)
        assert [back[i] for i in range(-40, 41)] == [p[i] for i in range(-40, 41)]
        assert back == p


@given(points, st.integers(-30, 30))
def test_shift_definition(p, k):
    s = p.shift(k)
    for i in range(-20, 21):
        assert s[i] == p[i + k]


def test_distance_examples():
    q = P.constant("-")
    assert distance(q, q) == 0
    assert distance(P("-", "+", "-", 0), q) == 1
    assert distance(P("-", "+", "-", -3), q) == Fraction(1, 8)
    assert distance(P("-", "+", "-", 3), q) == Fraction(1, 8)


@given(points, points)
def test_distance_matches_naive(p, q):
    assert distance(p, q) == naive_distance(p, q)
    assert distance(p, q) == distance(q, p)


@given(points, points, points)
def test_ultrametric(p, q, r):
    assert distance(p, r) <= max(distance(p, q), distance(q, r))


@given(points, points, st.integers(0, 10))
def test_truncated_distance(p, q, depth):
    d = truncated_distance(p, q, depth)
    full = distance(p, q)
    assert d == (full if full >= Fraction(1, 2**depth) else 0)


@given(words, cores, st.integers(1, 10), st.sampled_from("+-"))
def test_unstable_expansion(past, fut, k, sym):
    # p, q agree on coordinates <= 0 and first differ at index k >= 1
    fut = (fut + "+" * k)[: k - 1]
    fut = fut + "-" * (k - 1 - len(fut))
    p = P(past, past[-1:] + fut + sym, "-", 0)
    q = P(past, past[-1:] + fut + ("+" if sym == "-" else "-"), "-", 0)
    assert p.window(-30, 1) == q.window(-30, 1)
    assert distance(p, q) == Fraction(1, 2**k)
    assert distance(apply(MODEL, p, 1), apply(MODEL, q, 1)) == 2 * distance(p, q)


def test_phi_segment_examples():
    assert phi_segment(MODEL, P.constant("-"), 4) == [-1, -1, -1, -1]
    seg = phi_segment(MODEL, P.periodic("+-"), 2)
    assert seg == [1, -1] and sum(seg) == 0
    with pytest.raises(ValueError):
        phi_segment(MODEL, P.constant("-"), 0)


def test_birkhoff_average_direct_count():
    rng = random.Random(3)
    for _ in range(50):
        w = "".join(rng.choice("+-") for _ in range(rng.randint(1, 30)))
        direct = Fraction(w.count("+") - w.count("-"), len(w)) * MODEL.beta
        seg = phi_segment(MODEL, P.periodic(w), len(w))
        assert Fraction(sum(seg), len(w)) == direct == MODEL.birkhoff_average(w)


def test_phi_separation():
    for p in (P.constant("+"), P("-", "+", "-", 0)):
        assert MODEL.phi(p[0]) >= 2 * MODEL.tau > 0
    assert MODEL.phi("-") <= -2 * MODEL.tau
    assert MODEL.violations() == []
    assert SymbolicModel(tau=Fraction(3, 4)).violations()


def test_model_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SymbolicModel(beta=0)
    with pytest.raises(ValueError):
        SymbolicModel(lambda_u=1)
    with pytest.raises(TypeError):
        SymbolicModel(beta=0.5)


def test_skew_apply_examples():
    m = AffineSkewModel(a_minus=Fraction(1, 2), b_minus=Fraction(0))
    s = skew_apply(m, SkewState(P.constant("-"), 0), 7)
    assert s.fiber == 0
    m = AffineSkewModel(a_minus=Fraction(1, 2), b_minus=Fraction(1, 2))
    s = skew_apply(m, SkewState(P.constant("-"), 0), 2)
    assert s.fiber == Fraction(3, 4)
    m = AffineSkewModel(a_plus=2, b_plus=0, a_minus=Fraction(1, 2), b_minus=Fraction(1, 2))
    assert m.compose("--+") == (Fraction(1, 2), Fraction(3, 2))


@given(st.text(alphabet="+-", min_size=1, max_size=12), st.fractions(max_denominator=20))
def test_skew_composition_matches_stepwise(word, theta):
    m = AffineSkewModel(a_plus=3, b_plus=Fraction(1, 3), a_minus=Fraction(1, 4), b_minus=Fraction(-1, 2))
    s = SkewState(P.periodic(word), theta)
    stepped = s
    for _ in range(len(word)):
        stepped = skew_apply(m, stepped, 1)
    direct = skew_apply(m, s, len(word))
    assert stepped == direct


@given(st.text(alphabet="+-", min_size=1, max_size=12))
def test_skew_cocycle_additivity(word):
    # log A equals the sum of log a_s along the word
    m = AffineSkewModel()
    A, _ = m.compose(word)
    lo = sum(log_bounds(m.fiber_map(s)[0])[0] for s in word)
    hi = sum(log_bounds(m.fiber_map(s)[0])[1] for s in word)
    alo, ahi = log_bounds(A)
    assert alo <= hi and lo <= ahi
    assert A == m.a_plus ** word.count("+") * m.a_minus ** word.count("-")


def test_skew_model_sign_requirement():
    with pytest.raises(ValueError):
        AffineSkewModel(a_plus=Fraction(1, 2))


@pytest.mark.parametrize("x", [Fraction(1, 3), Fraction(2), Fraction(8), Fraction(1, 8), Fraction(10**6, 7)])
def test_log_exp_bounds_bracket(x):
    import math

    lo, hi = log_bounds(x)
    assert lo <= hi and hi - lo < Fraction(1, 2**80)
    assert float(lo) <= math.log(x) + 1e-12 and math.log(x) - 1e-12 <= float(hi)
    elo, ehi = exp_bounds(-lo)
    assert elo * x <= 1 + Fraction(1, 2**60)
    assert ehi * x >= 1 - Fraction(1, 2**60)
