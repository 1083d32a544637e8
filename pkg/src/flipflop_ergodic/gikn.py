"""(epsilon, kappa)-goodness between periodic orbits and verification of the
hypotheses of the ergodic-limit criterion for sequences of periodic orbits."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._exact import as_fraction, cyclic_extend, dyadic_exponent
from .measures import window_codes
from .model import SymbolicModel


@dataclass(eq=False)
class GoodnessWitness:
    """``subset`` lists indices ``y`` of ``gamma1``; ``projection[i]`` is the index
    ``xi(y)`` in ``gamma2`` of ``subset[i]``; each index of ``gamma2`` has exactly
    ``fiber_count`` preimages."""

    epsilon: Fraction
    kappa: Fraction
    subset: np.ndarray
    projection: np.ndarray
    fiber_count: int
    period1: int
    period2: int

    @property
    def proportion(self) -> Fraction:
        return Fraction(int(self.subset.size), self.period1)


def _as_bytes(word: str) -> np.ndarray:
    return np.frombuffer(word.encode("ascii"), dtype=np.uint8)


def _radius(epsilon) -> int | None:
    """``e`` with ``d < epsilon`` iff agreement on ``[-e, e]``; None when every pair is closer."""
    e = dyadic_exponent(epsilon)
    return None if e < 0 else e


_CHUNK = 1 << 22


def _index_dtype(n: int):
    return np.int32 if n < 2**31 - 1 else np.int64


def _window_sums(flags: np.ndarray, width: int, count: int) -> np.ndarray:
    """``sum(flags[y : y + width])`` for ``y < count``."""
    dt = _index_dtype(flags.size + 1)
    pre = np.zeros(flags.size + 1, dtype=dt)
    np.cumsum(flags, dtype=dt, out=pre[1:])
    out = pre[width : width + count] - pre[:count]
    return out


def _shadow_runs(gamma1: str, gamma2: str, e: int) -> list[tuple[int, int, int]]:
    """Maximal runs ``(start, length, phase)`` of shadowing indices: ``start + i``
    shadows ``gamma2`` from phase ``(phase + i) % p2``."""
    p1, p2 = len(gamma1), len(gamma2)
    # ext[u] = gamma1[u - e]; the window of y is ext[y : y + p2 + 2e]
    ext = cyclic_extend(gamma1, -e, p1 + p2 + 2 * e)
    x = _as_bytes(ext)
    c = x[: p1 + 2 * e] == x[p2 : p1 + 2 * e + p2]
    # the window is p2-periodic iff c holds on [y, y + 2e)
    if e:
        cand = _window_sums(~c, 2 * e, p1) == 0
    else:
        cand = np.ones(p1, dtype=bool)
    # every rotation of gamma2 has the same number of plus symbols
    cand &= _window_sums(x == ord("+"), p2, p1) == gamma2.count("+")
    del x
    # consecutive candidates whose blocks are rotations by one of each other
    link = cand[:-1] & cand[1:] & c[: p1 - 1]
    del c
    starts = np.flatnonzero(cand & ~np.concatenate(([False], link)))
    ends = np.flatnonzero(cand & ~np.concatenate((link, [False])))
    del link, cand
    doubled = gamma2 + gamma2
    cache: dict[str, int] = {}
    runs = []
    for s, t in zip(starts.tolist(), ends.tolist()):
        block = ext[s : s + p2]
        ph = cache.get(block)
        if ph is None:
            ph = doubled.find(block)
            cache[block] = ph
        if ph >= 0:
            runs.append((s, t - s + 1, (ph + e) % p2))
    return runs


def _materialize(runs, p1: int, p2: int) -> tuple[np.ndarray, np.ndarray]:
    dt = _index_dtype(p1 + p2)
    total = sum(n for _, n, _ in runs)
    sub = np.empty(total, dtype=dt)
    proj = np.empty(total, dtype=dt)
    i = 0
    for s, n, ph in runs:
        sub[i : i + n] = np.arange(s, s + n, dtype=dt)
        pr = proj[i : i + n]
        pr[:] = np.arange(n, dtype=dt)
        pr += ph
        pr %= p2
        i += n
    return sub, proj


def shadowing_indices(gamma1: str, gamma2: str, epsilon) -> tuple[np.ndarray, np.ndarray]:
    """All indices ``y`` of ``gamma1`` whose forward ``pi(gamma2)``-orbit stays
    ``epsilon``-close to that of some point of ``gamma2``, with the first such phase."""
    p1, p2 = len(gamma1), len(gamma2)
    e = _radius(epsilon)
    runs = [(0, p1, 0)] if e is None else _shadow_runs(gamma1, gamma2, e)
    return _materialize(runs, p1, p2)


def _split(runs, p2: int):
    """Pieces of length at most ``p2``, so projections inside a piece are distinct."""
    for s, n, ph in runs:
        for off in range(0, n, p2):
            yield s + off, min(p2, n - off), (ph + off) % p2


def _cyclic_add(acc: np.ndarray, ph: int, n: int) -> None:
    """Add 1 on the cyclic interval ``[ph, ph + n)`` of ``acc`` (``n <= len(acc)``)."""
    p2 = acc.size
    end = ph + n
    acc[ph : min(end, p2)] += 1
    if end > p2:
        acc[: end - p2] += 1


def check_good(gamma1: str, gamma2: str, epsilon, kappa) -> GoodnessWitness | None:
    """Witness that ``gamma1`` is ``(epsilon, kappa)``-good for ``gamma2``, or None.

    The maximal shadowing subset is trimmed to equal fibers by dropping the
    latest indices of each over-full fiber.
    """
    epsilon, kappa = as_fraction(epsilon), as_fraction(kappa)
    p1, p2 = len(gamma1), len(gamma2)
    if p1 == 0 or p2 == 0:
        raise ValueError("empty orbit")
    e = _radius(epsilon)
    runs = [(0, p1, 0)] if e is None else _shadow_runs(gamma1, gamma2, e)
    dt = _index_dtype(p1 + p2)
    counts = np.zeros(p2, dtype=dt)
    for s, n, ph in _split(runs, p2):
        _cyclic_add(counts, ph, n)
    fc = int(counts.min())
    if fc == 0 or Fraction(fc * p2, p1) < kappa:
        return None
    if int(counts.max()) > fc:
        # walk the pieces in index order, keeping an index while its fiber has room
        seen = np.zeros(p2, dtype=dt)
        kept = []
        for s, n, ph in _split(runs, p2):
            pr = (np.arange(n, dtype=dt) + ph) % p2
            ok = seen[pr] < fc
            seen[pr] += 1
            if ok.all():
                kept.append((s, n, ph))
                continue
            # split the piece at the indices that are dropped
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                continue
            brk = np.flatnonzero(np.diff(idx) != 1)
            lo = np.concatenate(([0], brk + 1))
            hi = np.concatenate((brk, [idx.size - 1]))
            for a, b in zip(idx[lo].tolist(), idx[hi].tolist()):
                kept.append((s + a, b - a + 1, (ph + a) % p2))
        runs = kept
    sub, proj = _materialize(runs, p1, p2)
    return GoodnessWitness(epsilon, kappa, sub, proj, fc, p1, p2)


def validate_witness(gamma1: str, gamma2: str, w: GoodnessWitness) -> list[str]:
    """Re-check the three defining conditions of a goodness witness from scratch."""
    out = []
    p1, p2 = len(gamma1), len(gamma2)
    if (w.period1, w.period2) != (p1, p2):
        out.append("periods do not match the orbits")
        return out
    sub, proj = np.asarray(w.subset), np.asarray(w.projection)
    if sub.size != proj.size:
        return ["subset and projection differ in size"]
    if sub.size and (sub.min() < 0 or sub.max() >= p1 or proj.min() < 0 or proj.max() >= p2):
        return ["index out of range"]
    increasing = bool(np.all(sub[1:] > sub[:-1]))
    if not increasing and np.unique(sub).size != sub.size:
        out.append("subset has repeated indices")
    if Fraction(int(sub.size), p1) < w.kappa:
        out.append(f"proportion {Fraction(int(sub.size), p1)} below kappa {w.kappa}")
    counts = np.zeros(p2, dtype=np.int64)
    for lo in range(0, proj.size, _CHUNK):
        counts += np.bincount(proj[lo : lo + _CHUNK], minlength=p2)
    if w.fiber_count < 1 or np.any(counts != w.fiber_count):
        out.append("fibers of the projection are not all of size fiber_count")
    del counts
    e = _radius(w.epsilon)
    if e is None:
        return out
    # y is valid iff gamma1 and the gamma2-periodic word at offset (y - xi(y))
    # agree on [y - e, y + p2 + e)
    L = p2 + 2 * e
    ext1 = _as_bytes(cyclic_extend(gamma1, -e, p1 + L))
    offsets = sub - proj
    offsets %= p2
    for o in np.unique(offsets).tolist():
        ext2 = _as_bytes(cyclic_extend(gamma2, -e - o, p1 + L))
        mism = ext1 != ext2
        del ext2
        dt = _index_dtype(mism.size + 1)
        pre = np.zeros(mism.size + 1, dtype=dt)
        np.cumsum(mism, dtype=dt, out=pre[1:])
        del mism
        ys = sub[offsets == o]
        for lo in range(0, ys.size, _CHUNK):
            y = ys[lo : lo + _CHUNK]
            if np.any(pre[y + L] != pre[y]):
                out.append(f"some index with offset {o} leaves the epsilon-neighbourhood")
                break
    return out


# ---------------------------------------------------------------------------
# chains


@dataclass
class ChainReport:
    valid: bool
    witnesses: list[GoodnessWitness | None]
    failures: list[str]
    partial_eps: list[Fraction]
    partial_kappa: list[Fraction]
    periods: list[int]
    divergence_flag: bool
    decay_ok: bool | None = None
    product_lower_bound: Fraction | None = None
    notes: list[str] = field(default_factory=list)


def verify_gikn_chain(
    orbits: Sequence[str],
    epsilons: Sequence,
    kappas: Sequence,
    model: SymbolicModel | None = None,
    rho=None,
    zeta=None,
) -> ChainReport:
    """Check that ``orbits[n+1]`` is ``(epsilons[n], kappas[n])``-good for ``orbits[n]``.

    With ``model``, ``rho`` and ``zeta`` it also checks the decay certificate
    ``kappa_n = 1 - rho |lc(orbits[n])|`` with ``|lc(orbits[n])| <= zeta^n |lc(orbits[0])|``
    and derives an exact lower bound for the infinite product of the kappas.
    """
    n = len(orbits) - 1
    if n < 0:
        raise ValueError("need at least one orbit")
    if len(epsilons) < n or len(kappas) < n:
        raise ValueError("need one epsilon and one kappa per consecutive pair")
    eps = [as_fraction(x) for x in epsilons[:n]]
    kap = [as_fraction(x) for x in kappas[:n]]
    fails: list[str] = []
    wits: list[GoodnessWitness | None] = []
    for i in range(n):
        w = check_good(orbits[i + 1], orbits[i], eps[i], kap[i])
        wits.append(w)
        if w is None:
            fails.append(f"pair {i}: orbit {i + 1} is not ({eps[i]}, {kap[i]})-good for orbit {i}")
            continue
        probs = validate_witness(orbits[i + 1], orbits[i], w)
        fails += [f"pair {i}: {p}" for p in probs]
    periods = [len(o) for o in orbits]
    for i in range(n):
        if periods[i + 1] <= periods[i]:
            fails.append(f"periods do not increase at {i}: {periods[i]} -> {periods[i + 1]}")
    pe, pk = [], []
    se, sk = Fraction(0), Fraction(1)
    for x, k in zip(eps, kap):
        se += x
        sk *= k
        pe.append(se)
        pk.append(sk)
    # the tail of 1 - kappa must shrink geometrically for the product to stay positive
    gaps = [1 - k for k in kap]
    tail = gaps[len(gaps) // 2 :]
    ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0]
    diverge = bool(ratios) and max(ratios) > Fraction(9, 10)
    notes = []
    if diverge:
        notes.append("1 - kappa_n does not decay geometrically: the product may tend to 0")
    decay_ok = bound = None
    if model is not None and rho is not None and zeta is not None:
        rho, zeta = as_fraction(rho), as_fraction(zeta)
        lams = [abs(model.birkhoff_average(o)) for o in orbits]
        decay_ok = all(lams[i] <= zeta**i * lams[0] for i in range(len(orbits)))
        decay_ok = decay_ok and all(kap[i] == 1 - rho * lams[i] for i in range(n))
        if not decay_ok:
            fails.append("decay certificate kappa_n = 1 - rho |lc_n|, |lc_n| <= zeta^n |lc_0| fails")
        else:
            # prod_{m >= n} (1 - rho lc_0 zeta^m) >= 1 - rho lc_0 zeta^n / (1 - zeta)
            tail_loss = rho * lams[0] * zeta**n / (1 - zeta)
            bound = sk * (1 - tail_loss) if tail_loss < 1 else Fraction(0)
            if bound > 0:
                diverge = False
    return ChainReport(
        valid=not fails,
        witnesses=wits,
        failures=fails,
        partial_eps=pe,
        partial_kappa=pk,
        periods=periods,
        divergence_flag=diverge,
        decay_ok=decay_ok,
        product_lower_bound=bound,
        notes=notes,
    )


def limit_support(orbits: Sequence[str], m: int, tail_start: int) -> set[str]:
    """Length-``m`` words occurring in every orbit from ``tail_start`` on."""
    if not 0 <= tail_start < len(orbits):
        raise ValueError("tail_start outside the orbit list")
    if not 1 <= m <= 62:
        raise ValueError("m must lie in 1..62")
    common = None
    for o in orbits[tail_start:]:
        codes = set(np.unique(window_codes(o, m)).tolist())
        common = codes if common is None else common & codes
    return {"".join("+" if (c >> (m - 1 - j)) & 1 else "-" for j in range(m)) for c in common}
