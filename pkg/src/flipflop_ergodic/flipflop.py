"""Flip-flop family engine: family elements, segments, concatenation, the
multi-scale segment synthesizer and controlled-at-any-scale orbits."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from ._exact import MINUS, PLUS, as_fraction, log_lower, signed_count
from .analysis import ControlWitness, check_control
from .model import EventuallyPeriodicPoint, SymbolicModel, distance

BOOKKEEPING_DEPTH = 8


class SynthesisError(RuntimeError):
    """A requested segment or schedule does not exist within the search bounds."""


# ---------------------------------------------------------------------------
# family elements


@dataclass(frozen=True)
class FamilyElement:
    """The local unstable set ``{x : x_i = past_i for i <= 0}``; the last symbol is ``x_0``."""

    past: str

    def __post_init__(self):
        if not self.past or self.past.strip("+-"):
            raise ValueError("past must be a nonempty word over {+,-}")

    @property
    def sign(self) -> str:
        return self.past[-1]

    def contains(self, other: "FamilyElement") -> bool:
        """Set inclusion ``other subset self``: ``self.past`` is a suffix of ``other.past``."""
        return other.past.endswith(self.past)

    def image(self, sym: str) -> "FamilyElement":
        """``f(D_sym)`` where ``D_sym = {x in D : x_1 = sym}``."""
        return FamilyElement(self.past + sym)

    def representative(self, future: str = "", tail: str = MINUS) -> EventuallyPeriodicPoint:
        """A point of the element with coordinates ``1..len(future)`` given."""
        return EventuallyPeriodicPoint(self.past[0], self.past + future, tail, len(self.past) - 1)


@dataclass
class FamilyAxiomReport:
    elements: int
    separation: bool
    covering: bool
    expansion: bool
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.separation and self.covering and self.expansion


def verify_family_axioms(model: SymbolicModel, depth: int) -> FamilyAxiomReport:
    """Check the three flip-flop family axioms on every element with past length ``<= depth``."""
    elems = [
        FamilyElement("".join(w)) for n in range(1, depth + 1) for w in itertools.product("+-", repeat=n)
    ]
    fails: list[str] = []
    sep = cov = exp = True
    alpha = model.tau
    for e in elems:
        x = e.representative()
        val = model.phi(x[0])
        if e.sign == PLUS and not val >= 2 * alpha:
            sep = False
            fails.append(f"separation: phi = {val} < 2 tau = {2 * alpha} on {e.past}")
        if e.sign == MINUS and not val <= -2 * alpha:
            sep = False
            fails.append(f"separation: phi = {val} > -2 tau = {-2 * alpha} on {e.past}")
        for s in (PLUS, MINUS):
            img = e.representative(s).shift(1)
            target = e.image(s)
            if img.window(-len(target.past) + 1, 1) != target.past or target.sign != s:
                cov = False
                fails.append(f"covering: f(D_{s}) of {e.past} is not in the {s} class")
        # pairs in e with equal x_1 first differing at index k >= 2
        for k in range(2, depth + 3):
            for fut in itertools.product("+-", repeat=k - 1):
                f = "".join(fut)
                p = e.representative(f + PLUS)
                q = e.representative(f + MINUS)
                dp = distance(p, q)
                if distance(p.shift(1), q.shift(1)) != 2 * dp:
                    exp = False
                    fails.append(f"expansion: pair in {e.past} with future {f}")
    return FamilyAxiomReport(len(elems), sep, cov, exp, fails)


# ---------------------------------------------------------------------------
# scale schedules


@dataclass(frozen=True)
class ScaleSchedule:
    """Rates ``a_k < b_k`` and scales ``t_k`` for levels ``k = 1..K``.

    ``a[k-1]``, ``b[k-1]`` belong to level ``k``; ``t[k]`` is the scale of level
    ``k`` with ``t[0] = 1``.
    """

    a: tuple[Fraction, ...]
    b: tuple[Fraction, ...]
    t: tuple[int, ...]
    lambda_q: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(as_fraction(x) for x in self.a))
        object.__setattr__(self, "b", tuple(as_fraction(x) for x in self.b))
        object.__setattr__(self, "t", tuple(int(x) for x in self.t))
        object.__setattr__(self, "lambda_q", as_fraction(self.lambda_q))
        bad = self.violations()
        if bad:
            raise ValueError("invalid scale schedule: " + "; ".join(bad))

    @property
    def K(self) -> int:
        return len(self.b)

    def violations(self) -> list[str]:
        out = []
        if len(self.a) != len(self.b) or len(self.t) != len(self.b) + 1:
            return ["need len(a) == len(b) == len(t) - 1"]
        if self.lambda_q >= 0:
            out.append("lambda_q must be negative")
        if self.t[0] != 1:
            out.append("t_0 must be 1")
        for k in range(self.K):
            if not self.b[k] > self.a[k] > 0:
                out.append(f"need b_{k + 1} > a_{k + 1} > 0")
            if k + 1 < self.K and not self.a[k] > self.b[k + 1]:
                out.append(f"need a_{k + 1} > b_{k + 2} (got {self.a[k]} <= {self.b[k + 1]})")
            if not 3 * self.b[k] < abs(self.lambda_q):
                out.append(f"need 3 b_{k + 1} < |lambda_q|")
        for i in range(len(self.t) - 1):
            if self.t[i + 1] <= self.t[i] or self.t[i + 1] % self.t[i]:
                out.append(f"t_{i + 1} = {self.t[i + 1]} is not a proper multiple of t_{i} = {self.t[i]}")
        return out

    def level(self, k: int) -> tuple[Fraction, Fraction, int]:
        """``(a_k, b_k, t_k)``."""
        if not 1 <= k <= self.K:
            raise ValueError(f"level {k} outside 1..{self.K}")
        return self.a[k - 1], self.b[k - 1], self.t[k]


def default_rates(lambda_q: Fraction, K: int) -> tuple[list[Fraction], list[Fraction]]:
    b = [abs(lambda_q) / 2 ** (k + 2) for k in range(1, K + 1)]
    return [Fraction(3, 4) * x for x in b], b


def build_scale_schedule(
    model: SymbolicModel,
    K: int,
    lambda_q=None,
    b=None,
    a=None,
    max_doublings: int = 10,
) -> ScaleSchedule:
    """Rates (default ``b_k = |lambda_q| / 2^(k+2)``, ``a_k = 3 b_k / 4``) and the
    smallest scales ``t_k = 2^m t_{k-1}`` at which level-``k`` segments of both
    signs exist."""
    if K < 1:
        raise ValueError("K must be at least 1")
    lambda_q = as_fraction(lambda_q) if lambda_q is not None else -model.beta
    if b is None:
        a_def, b = default_rates(lambda_q, K)
    else:
        b = [as_fraction(x) for x in b]
        a_def = [Fraction(3, 4) * x for x in b]
    a = [as_fraction(x) for x in a] if a is not None else a_def
    cap = log_lower(model.lambda_u) / 16
    if b[0] > cap:
        raise SynthesisError(f"b_1 = {b[0]} exceeds log(lambda_u)/16 = {float(cap):.4f}")
    t = [1]
    for k in range(1, K + 1):
        for m in range(1, max_doublings + 1):
            cand = t + [t[-1] * 2**m]
            trial = _PartialSchedule(tuple(a[:k]), tuple(b[:k]), tuple(cand), model.beta)
            if all(_segment_shape(trial, k, s) is not None for s in (PLUS, MINUS)):
                t = cand
                break
        else:
            raise SynthesisError(
                f"no level-{k} segments of both signs with t_{k} <= {t[-1] * 2**max_doublings}: "
                f"the average window [{a[k - 1]}, {b[k - 1]}] admits no controlled sum"
            )
    return ScaleSchedule(tuple(a), tuple(b), tuple(t), lambda_q)


@dataclass(frozen=True)
class _PartialSchedule:
    a: tuple
    b: tuple
    t: tuple
    beta: Fraction


def _partial(schedule: ScaleSchedule, beta: Fraction) -> _PartialSchedule:
    return _PartialSchedule(schedule.a, schedule.b, schedule.t, beta)


# Blocks.  A level-1 block is t_1 symbols with signed count s, |beta s| <= b_1 t_1.
# A level-j block concatenates level-(j-1) blocks, has length <= t_j and
# |beta s| <= b_j L.  Level-k segments concatenate level-(k-1) blocks.


@lru_cache(maxsize=None)
def _items(ps: _PartialSchedule, j: int) -> frozenset:
    """``(L, s)`` shapes of level-``j`` blocks."""
    t1 = ps.t[1]
    if j == 1:
        return frozenset(
            (t1, s)
            for s in range(-(t1 - 2), t1 - 1)
            if (s - t1) % 2 == 0 and ps.beta * abs(s) <= ps.b[0] * t1
        )
    reach = _sums(ps, j - 1, ps.t[j])
    return frozenset((L, s) for (L, s) in reach if ps.beta * abs(s) <= ps.b[j - 1] * L)


@lru_cache(maxsize=None)
def _sums(ps: _PartialSchedule, j: int, max_len: int) -> frozenset:
    """Shapes of nonempty concatenations of level-``j`` blocks with length ``<= max_len``."""
    kids = sorted(_items(ps, j))
    by_len: dict[int, set] = {0: {0}}
    t1 = ps.t[1]
    for L in range(t1, max_len + 1, t1):
        acc = set()
        for (l, c) in kids:
            if l <= L and (L - l) in by_len:
                acc.update(x + c for x in by_len[L - l])
        if acc:
            by_len[L] = acc
    return frozenset((L, s) for L, ss in by_len.items() if L > 0 for s in ss)


def _segment_shape(ps: _PartialSchedule, k: int, sign: str) -> tuple[int, int] | None:
    """Smallest length, then smallest ``|s|``, of a level-``k`` segment of the given sign."""
    a, b = ps.a[k - 1], ps.b[k - 1]
    t_prev, t_k, t1 = ps.t[k - 1], ps.t[k], ps.t[1]
    sg = 1 if sign == PLUS else -1
    if k == 1:
        shapes = {(t1, s) for s in range(-(t1 - 2), t1 - 1) if (s - t1) % 2 == 0}
    else:
        shapes = _sums(ps, k - 1, t_k)
    best = None
    for (L, s) in shapes:
        if not (t_prev < L <= t_k and L % t1 == 0):
            continue
        avg = sg * ps.beta * Fraction(s, L)
        if a <= avg <= b:
            key = (L, abs(s))
            if best is None or key < best[0]:
                best = (key, (L, s))
    return best[1] if best else None


def _decompose(ps: _PartialSchedule, j: int, L: int, s: int) -> list[tuple[int, int]]:
    """Split shape ``(L, s)`` into level-``j`` blocks, longest first, sums kept near proportional."""
    kids = sorted(_items(ps, j), key=lambda x: (-x[0], x[1]))
    reach = _sums(ps, j, L)
    out = []
    done_L, done_s = 0, 0
    while done_L < L:
        best = None
        for (l, c) in kids:
            rl, rs = L - done_L - l, s - done_s - c
            if rl < 0 or (rl > 0 and (rl, rs) not in reach) or (rl == 0 and rs != 0):
                continue
            # distance of the running sum from the proportional line
            dev = abs(Fraction((done_s + c) * L - s * (done_L + l), L))
            key = (-l, dev, c)
            if best is None or key < best[0]:
                best = (key, (l, c))
        if best is None:
            raise SynthesisError(f"internal: shape {(L, s)} not decomposable at level {j}")
        l, c = best[1]
        out.append((l, c))
        done_L += l
        done_s += c
    return out


@dataclass
class _Node:
    level: int
    length: int
    total: int
    children: list


def _tree(ps: _PartialSchedule, level: int, L: int, s: int) -> _Node:
    """Block tree of a level-``level`` shape; level-1 nodes are leaves."""
    if level == 1:
        return _Node(1, L, s, [])
    kids = [_tree(ps, level - 1, l, c) for (l, c) in _decompose(ps, level - 1, L, s)]
    return _Node(level, L, s, kids)


def _leaves(node: _Node):
    if node.level == 1:
        yield node
    else:
        for c in node.children:
            yield from _leaves(c)


def _cuts(node: _Node, level: int, offset: int = 0) -> list[int]:
    """End positions of the level-``level`` blocks under ``node``."""
    if node.level == level:
        return [offset + node.length]
    out = []
    for c in node.children:
        out += _cuts(c, level, offset)
        offset += c.length
    return out


def leaf_word(length: int, s: int, first: str) -> str:
    """``length`` symbols with signed count ``s`` starting with ``first``.

    The rest is a run of the majority symbol followed by an alternating
    ``-+`` tail, so leaves of one length share their longest possible suffix.
    """
    plus = (length + s) // 2 - (first == PLUS)
    rest = length - 1
    if not 0 <= plus <= rest:
        raise SynthesisError(f"leaf ({length}, {s}) cannot start with {first}")
    if 2 * plus <= rest:
        body = MINUS * (rest - 2 * plus) + (MINUS + PLUS) * plus
    else:
        body = PLUS * (2 * plus - rest) + (MINUS + PLUS) * (rest - plus)
    return first + body


# ---------------------------------------------------------------------------
# patterns


@lru_cache(maxsize=32)
def _dense_chunk(seed: int | None, max_len: int) -> str:
    """All words of length 1..max_len, concatenated by increasing length."""
    rng = random.Random(seed) if seed is not None else None
    parts = []
    for n in range(1, max_len + 1):
        ws = ["".join(w) for w in itertools.product("+-", repeat=n)]
        if rng is not None:
            rng.shuffle(ws)
        parts.extend(ws)
    return "".join(parts)


@dataclass(frozen=True)
class Pattern:
    """A reproducible sequence over ``{+,-}``: ``explicit`` followed by the
    concatenation of all finite words (shuffled within each length by ``seed``),
    read from position ``offset``."""

    seed: int | None = None
    explicit: str = ""
    offset: int = 0

    @classmethod
    def from_word(cls, word: str, seed: int | None = None) -> "Pattern":
        return cls(seed, word, 0)

    def prefix(self, n: int) -> str:
        need = self.offset + n
        base = self.explicit
        if len(base) < need:
            m = 1
            while len(base) + len(_dense_chunk(self.seed, m)) < need:
                m += 1
            base = base + _dense_chunk(self.seed, m)
        return base[self.offset : need]

    def symbol(self, j: int) -> str:
        return self.prefix(j + 1)[j]

    def shifted(self, k: int) -> "Pattern":
        return Pattern(self.seed, self.explicit, self.offset + k)


def follows_pattern(word: str, t1: int, prefix: str) -> bool:
    """``word[n] == prefix[n / t1]`` for every multiple ``n`` of ``t1`` below ``len(word)``."""
    marks = word[::t1]
    return len(prefix) >= len(marks) and marks == prefix[: len(marks)]


# ---------------------------------------------------------------------------
# segments


@dataclass(frozen=True)
class FSegment:
    """A segment entering ``entrance``; ``word`` lists the symbols at times ``1..T``."""

    entrance: FamilyElement
    word: str
    certificates: tuple[ControlWitness, ...]
    average: Fraction
    pattern_cert: tuple[int, str] | None = None
    beta: Fraction = Fraction(1)
    level: int | None = None

    @property
    def T(self) -> int:
        return len(self.word)

    @property
    def exit(self) -> FamilyElement:
        return FamilyElement((self.entrance.past + self.word)[-BOOKKEEPING_DEPTH:])

    def validate(self) -> list[str]:
        """Problems with the stored data; empty when everything re-checks."""
        out = []
        if self.average != self.beta * Fraction(signed_count(self.word), self.T):
            out.append("average does not match the word")
        for w in self.certificates:
            if w.T != self.T or not w.validate(self.word, self.beta):
                out.append(f"control witness at (beta={w.beta}, t={w.t}) fails")
        if self.pattern_cert is not None:
            t1, pre = self.pattern_cert
            if not follows_pattern(self.word, t1, pre):
                out.append("pattern certificate fails")
        return out


def synthesize_segment(
    model: SymbolicModel,
    schedule: ScaleSchedule,
    k: int,
    sign: str,
    pattern: Pattern,
    entrance: FamilyElement | None = None,
) -> FSegment:
    """Level-``k`` segment of the given sign following ``pattern`` at multiples of ``t_1``."""
    if not 1 <= k <= schedule.K:
        raise SynthesisError(f"level {k} outside the schedule (K = {schedule.K})")
    ps = _partial(schedule, model.beta)
    shape = _segment_shape(ps, k, sign)
    if shape is None:
        raise SynthesisError(f"no level-{k} {sign} segment within (t_{k - 1}, t_{k}]")
    L, s = shape
    t1 = schedule.t[1]
    root = _Node(1, L, s, []) if k == 1 else _Node(
        k, L, s, [_tree(ps, k - 1, l, c) for (l, c) in _decompose(ps, k - 1, L, s)]
    )
    leaves = list(_leaves(root))
    marks = pattern.prefix(len(leaves))
    word = "".join(leaf_word(lf.length, lf.total, m) for lf, m in zip(leaves, marks))
    certs = []
    for i in range(1, k):
        cuts = (0, *_cuts(root, i))
        w = ControlWitness(cuts, schedule.b[i - 1], schedule.t[i], L)
        if not w.validate(word, model.beta):
            raise SynthesisError(f"internal: level-{i} block partition fails control")
        certs.append(w)
    avg = model.beta * Fraction(signed_count(word), L)
    seg = FSegment(
        entrance or FamilyElement(MINUS),
        word,
        tuple(certs),
        avg,
        (t1, marks),
        model.beta,
        k,
    )
    problems = seg.validate()
    if problems:
        raise SynthesisError("internal: " + "; ".join(problems))
    return seg


def concatenate(seg_a: FSegment, seg_b: FSegment) -> FSegment:
    """``seg_a * seg_b``; the exit of ``seg_a`` must be compatible with the entrance of ``seg_b``."""
    ex, en = seg_a.exit.past, seg_b.entrance.past
    if not (ex.endswith(en) or en.endswith(ex)):
        raise ValueError(f"exit ...{ex} of the first segment does not meet entrance ...{en}")
    if seg_a.beta != seg_b.beta:
        raise ValueError("segments come from different models")
    word = seg_a.word + seg_b.word
    T = len(word)
    avg = (seg_a.average * seg_a.T + seg_b.average * seg_b.T) / T
    certs = []
    for wa in seg_a.certificates:
        for wb in seg_b.certificates:
            if (wa.beta, wa.t) == (wb.beta, wb.t):
                cuts = wa.partition + tuple(seg_a.T + c for c in wb.partition[1:])
                certs.append(ControlWitness(cuts, wa.beta, wa.t, T))
    pc = None
    if seg_a.pattern_cert and seg_b.pattern_cert:
        (t1, pa), (t1b, pb) = seg_a.pattern_cert, seg_b.pattern_cert
        if t1 == t1b and seg_a.T % t1 == 0:
            pc = (t1, pa + pb)
    return FSegment(seg_a.entrance, word, tuple(certs), avg, pc, seg_a.beta, None)


def pattern_marks_needed(schedule: ScaleSchedule, model: SymbolicModel, k: int, sign: str) -> int:
    shape = _segment_shape(_partial(schedule, model.beta), k, sign)
    return shape[0] // schedule.t[1]


@dataclass
class ControlledOrbit:
    word: str
    segments: list[FSegment]
    signs: str
    certificates: list[ControlWitness]
    pattern_prefix: str


def synthesize_controlled_orbit(
    model: SymbolicModel, schedule: ScaleSchedule, pattern: Pattern, depth: int
) -> ControlledOrbit:
    """Concatenate level ``1..depth`` segments (signs searched in lexicographic
    order) so the prefix is ``(2 b_i, t_i, T)``-controlled for every ``i <= depth``."""
    if not 1 <= depth <= schedule.K:
        raise SynthesisError(f"depth {depth} outside 1..{schedule.K}")
    for signs in itertools.product((PLUS, MINUS), repeat=depth):
        segs, pat = [], pattern
        for k, sg in enumerate(signs, start=1):
            seg = synthesize_segment(model, schedule, k, sg, pat,
                                     segs[-1].exit if segs else None)
            segs.append(seg)
            pat = pat.shifted(seg.T // schedule.t[1])
        word = "".join(s.word for s in segs)
        certs = []
        for i in range(1, depth + 1):
            w = check_control(word, 2 * schedule.b[i - 1], schedule.t[i], len(word), model.beta)
            if w is None:
                break
            certs.append(w)
        else:
            prefix = "".join(s.pattern_cert[1] for s in segs)
            return ControlledOrbit(word, segs, "".join(signs), certs, prefix)
    raise SynthesisError(f"no sign choice gives a controlled orbit at depth {depth}")
