from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from flipflop_ergodic._exact import primitive_root
from flipflop_ergodic.gikn import (
    GoodnessWitness,
    check_good,
    limit_support,
    validate_witness,
    verify_gikn_chain,
)
from flipflop_ergodic.measures import factors
from flipflop_ergodic.model import EventuallyPeriodicPoint as P
from flipflop_ergodic.model import SymbolicModel, distance

words = st.text("+-", min_size=1, max_size=9)


def brute_good_set(g1, g2, eps):
    """Indices y of g1 with a phase j of g2 shadowing it for pi(g2) steps, via the metric."""
    x, q = P.periodic(g1), P.periodic(g2)
    out = {}
    for y in range(len(g1)):
        for j in range(len(g2)):
            if all(distance(x.shift(y + t), q.shift(j + t)) < eps for t in range(len(g2))):
                out.setdefault(y, j)
    return out


def brute_max_proportion(g1, g2, eps):
    good = brute_good_set(g1, g2, eps)
    counts = [sum(1 for j in good.values() if j == k) for k in range(len(g2))]
    return Fraction(min(counts) * len(g2), len(g1))


def test_spec_example_window_scan():
    g1, g2 = "-" * 8 + "++", "-"
    w = check_good(g1, g2, Fraction(1, 4), Fraction(2, 5))
    # direct scan: coordinates -2..2 of f^y all minus
    expect = [y for y in range(10) if all(g1[(y + k) % 10] == "-" for k in range(-2, 3))]
    assert w.subset.tolist() == expect == [2, 3, 4, 5]
    assert w.fiber_count == 4
    assert validate_witness(g1, g2, w) == []
    assert check_good(g1, g2, Fraction(1, 4), Fraction(2, 5) + Fraction(1, 100)) is None


def test_self_goodness_identity():
    for g in ["+", "+--", "-+-++-", "+" * 3 + "-" * 5]:
        for e in range(0, 6):
            w = check_good(g, g, Fraction(1, 2**e), 1)
            assert w is not None
            assert w.subset.tolist() == list(range(len(g)))
            assert w.projection.tolist() == list(range(len(g)))


def test_large_epsilon_is_vacuous():
    w = check_good("+-+--", "++", 2, Fraction(4, 5))
    assert w is not None and w.fiber_count == 2
    assert validate_witness("+-+--", "++", w) == []


@given(words, words, st.integers(0, 4))
@settings(max_examples=150, deadline=None)
def test_matches_brute_force(g1, g2, e):
    g1, g2 = primitive_root(g1), primitive_root(g2)
    eps = Fraction(1, 2**e)
    best = brute_max_proportion(g1, g2, eps)
    if best == 0:
        assert check_good(g1, g2, eps, Fraction(1, 10**6)) is None
        return
    w = check_good(g1, g2, eps, best)
    assert w is not None and w.proportion == best
    assert w.fiber_count * len(g2) == w.subset.size
    assert validate_witness(g1, g2, w) == []
    good = brute_good_set(g1, g2, eps)
    for y, j in zip(w.subset.tolist(), w.projection.tolist()):
        assert good[y] == j
    assert check_good(g1, g2, eps, best + Fraction(1, len(g1))) is None


@given(words, words, st.integers(0, 4), st.integers(1, 3))
@settings(max_examples=80, deadline=None)
def test_monotone_in_epsilon_and_kappa(g1, g2, e, de):
    g1, g2 = primitive_root(g1), primitive_root(g2)
    sub, _ = (check_good(g1, g2, Fraction(1, 2**e), Fraction(1, 10**6)) or GoodnessWitness(
        0, 0, np.zeros(0), np.zeros(0), 0, len(g1), len(g2))).subset, None
    if sub.size == 0:
        return
    k = Fraction(int(sub.size), len(g1))
    coarser = Fraction(1, 2 ** max(e - de, 0))
    assert check_good(g1, g2, coarser, k) is not None
    assert check_good(g1, g2, Fraction(1, 2**e), k / 2) is not None


def test_validate_detects_tampering():
    g1, g2 = "-" * 8 + "++", "-"
    w = check_good(g1, g2, Fraction(1, 4), Fraction(2, 5))
    bad = GoodnessWitness(w.epsilon, w.kappa, np.array([2, 3, 4, 7]), w.projection, 4, 10, 1)
    assert any("neighbourhood" in p for p in validate_witness(g1, g2, bad))
    bad = GoodnessWitness(w.epsilon, Fraction(1, 2), w.subset, w.projection, 4, 10, 1)
    assert any("below kappa" in p for p in validate_witness(g1, g2, bad))


def test_chain_vacuous_and_basic():
    rep = verify_gikn_chain(["-"], [], [])
    assert rep.valid and rep.partial_kappa == []
    orbits = ["-", "---+", "---+" * 4 + "--++"]
    eps = [Fraction(1, 2), Fraction(1, 2)]
    kap = [brute_max_proportion(orbits[i + 1], orbits[i], eps[i]) for i in range(2)]
    assert kap == [Fraction(1, 4), Fraction(3, 5)]
    rep = verify_gikn_chain(orbits, eps, kap)
    assert rep.valid, rep.failures
    assert rep.partial_eps == [Fraction(1, 2), Fraction(1)]
    assert rep.partial_kappa == [Fraction(1, 4), Fraction(3, 20)]
    # re-running check_good per pair reproduces every witness
    for i, w in enumerate(rep.witnesses):
        again = check_good(orbits[i + 1], orbits[i], w.epsilon, w.kappa)
        assert again.subset.tolist() == w.subset.tolist()


def test_chain_names_failing_pair():
    rep = verify_gikn_chain(["-", "+++-"], [Fraction(1, 2)], [Fraction(1, 2)])
    assert not rep.valid and rep.failures[0].startswith("pair 0")
    rep = verify_gikn_chain(["-+", "+-"], [Fraction(1, 2)], [Fraction(1, 2)])
    assert any("periods do not increase" in f for f in rep.failures)


def test_chain_divergence_flag():
    n = 12
    kap = [1 - Fraction(1, k + 2) for k in range(n)]
    # oracle: partial product of 1 - 1/(k+2) telescopes to 1/(n+1)
    orbits = ["-"] + ["-" * (2 + k) + "+" for k in range(n)]
    rep = verify_gikn_chain(orbits, [Fraction(2)] * n, kap)
    assert rep.partial_kappa[-1] == Fraction(1, n + 1)
    assert rep.divergence_flag
    geo = [1 - Fraction(1, 2 ** (k + 2)) for k in range(n)]
    assert not verify_gikn_chain(orbits, [Fraction(2)] * n, geo).divergence_flag


def test_chain_decay_certificate():
    m = SymbolicModel()
    orbits = ["-", "---+", "---+-+-+", "-" * 9 + "+" * 7, "-" * 17 + "+" * 15]
    lams = [abs(m.birkhoff_average(o)) for o in orbits]
    rho, zeta = Fraction(2, 3), Fraction(3, 4)
    kap = [1 - rho * lam for lam in lams[:-1]]
    rep = verify_gikn_chain(orbits, [Fraction(2)] * 4, kap, m, rho, zeta)
    assert rep.valid and rep.decay_ok
    tail = rho * lams[0] * zeta**4 / (1 - zeta)
    assert tail < 1
    assert rep.product_lower_bound == rep.partial_kappa[-1] * (1 - tail) > 0
    bad = [k - Fraction(1, 100) for k in kap]
    assert not verify_gikn_chain(orbits, [Fraction(2)] * 4, bad, m, rho, zeta).decay_ok


def test_limit_support():
    g = "+--+-"
    assert limit_support([g, g, g], 3, 0) == factors([g], 3)
    orbits = ["-", "--+", "-+-+"]
    assert limit_support(orbits, 1, 1) == {"+", "-"}
    assert limit_support(orbits, 2, 1) == {"-+", "+-"}
    assert limit_support(orbits, 2, 0) == set()
    every = "".join(itertools.chain.from_iterable(itertools.product("+-", repeat=3)))
    assert len(limit_support([every], 3, 0)) == 8
