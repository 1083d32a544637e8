"""Bridge orbits, the descend step and the drivers that iterate them, with
exact certificates for every emitted orbit."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import MINUS, PLUS, as_fraction, cyclic_extend, dyadic_exponent, signed_count
from .analysis import ControlWitness, OrbitSegment, PseudoOrbit, check_control, quasi_string_certificate
from .flipflop import (
    BOOKKEEPING_DEPTH,
    FamilyElement,
    FSegment,
    Pattern,
    ScaleSchedule,
    SynthesisError,
    build_scale_schedule,
    concatenate,
    follows_pattern,
    pattern_marks_needed,
    synthesize_segment,
)
from .gikn import ChainReport, GoodnessWitness, check_good, limit_support, validate_witness, verify_gikn_chain
from .measures import (
    OrbitSetApprox,
    _code_word,
    empirical_measure,
    hausdorff_distance,
    weak_star_distance,
    window_codes,
    word_complexity,
)
from .model import EventuallyPeriodicPoint, SymbolicModel
from .shadowing import ShadowResult, shadow_symbolic


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    margin: Fraction | None = None
    detail: str = ""


class CertificateError(RuntimeError):
    """A constructed orbit failed one of its certificates."""

    def __init__(self, what: str, checks: list[Check]):
        self.checks = checks
        bad = [f"{c.name} (margin {c.margin}){': ' + c.detail if c.detail else ''}"
               for c in checks if not c.ok]
        super().__init__(f"{what}: " + "; ".join(bad))


def _interval_check(name: str, value: Fraction, lo: Fraction, hi: Fraction, closed=False) -> Check:
    margin = min(value - lo, hi - value)
    ok = margin >= 0 if closed else margin > 0
    br = "[]" if closed else "()"
    return Check(name, ok, margin, f"{value} in {br[0]}{lo}, {hi}{br[1]}")


def _eps_radius(epsilon) -> int:
    """``e`` with ``epsilon = 2^-e``; negative means every point is epsilon-close."""
    return dyadic_exponent(as_fraction(epsilon))


def _bytes(word: str) -> np.ndarray:
    return np.frombuffer(word.encode("ascii"), dtype=np.uint8)


def _minus_runs(word: str, lo_off: int, hi_off: int) -> np.ndarray:
    """``ok[j]``: cyclic coordinates ``j+lo_off .. j+hi_off`` of ``word`` are all minus."""
    n = len(word)
    width = hi_off - lo_off + 1
    ext = _bytes(cyclic_extend(word, lo_off, n + width - 1)) == ord(MINUS)
    bad = np.concatenate(([0], np.cumsum(~ext, dtype=np.int64)))
    j = np.arange(n)
    return (bad[j + width] - bad[j]) == 0


def _max_prefix_average(word: str) -> Fraction:
    """``max_k (1/k) * (signed count of word[:k])``, exactly."""
    pre = np.cumsum(np.where(_bytes(word) == ord(PLUS), 1, -1))
    k = np.arange(1, len(word) + 1)
    approx = pre / k
    cand = np.flatnonzero(approx >= approx.max() - 1e-9)
    return max(Fraction(int(pre[i]), int(i) + 1) for i in cand)


# ---------------------------------------------------------------------------
# bridge orbits


@dataclass(frozen=True)
class BridgePlan:
    k: int
    ell: int
    n_segments: int
    T_total: int
    N_d: int
    jump_depth: int
    gamma_bounds: tuple[Fraction, Fraction]
    delta: Fraction
    epsilon: Fraction

    @property
    def period(self) -> int:
        return self.ell + self.T_total + self.N_d

    @property
    def d(self) -> Fraction:
        return Fraction(1, 2**self.jump_depth)


def gamma_window(schedule: ScaleSchedule, k: int, delta) -> tuple[Fraction, Fraction]:
    """Open window for ``ell / T_total`` that puts the lower average estimate in ``[-3b_k, -2b_k]``."""
    a, b, _ = schedule.level(k)
    lam, delta = schedule.lambda_q, as_fraction(delta)
    lo = (b + delta) / (-lam + a / 4 - 2 * b - delta)
    hi = (2 * b - delta) / (-3 * b + delta - lam + a / 4)
    return lo, hi


def gamma2(model: SymbolicModel, schedule: ScaleSchedule, plan: BridgePlan) -> Fraction:
    """Lower estimate of the pseudo-orbit average from the schedule bounds alone."""
    a, b, _ = schedule.level(plan.k)
    lam = schedule.lambda_q
    num = (plan.ell - plan.N_d) * (lam - a / 4) - plan.T_total * b - 2 * plan.N_d * model.phi_norm
    return num / plan.period


def bridge_plan_violations(model: SymbolicModel, schedule: ScaleSchedule, plan: BridgePlan) -> list[str]:
    a, b, tk = schedule.level(plan.k)
    out = []
    lo, hi = gamma_window(schedule, plan.k, plan.delta)
    ratio = Fraction(plan.ell, plan.T_total)
    if not lo < ratio < hi:
        out.append(f"ell/T = {ratio} outside ({lo}, {hi})")
    lhs = Fraction(plan.N_d + tk) * model.phi_norm / plan.period
    if not lhs < a / 4:
        out.append(f"(N_d + t_k)|phi|/pi = {lhs} not below a_k/4 = {a / 4}")
    g2 = gamma2(model, schedule, plan)
    glo, ghi = plan.gamma_bounds
    if not glo <= g2 <= ghi:
        out.append(f"Gamma_2 = {g2} outside [{glo}, {ghi}]")
    if plan.ell < plan.N_d:
        out.append(f"ell = {plan.ell} below N_d = {plan.N_d}")
    if Fraction(1, 2**plan.jump_depth) >= plan.epsilon:
        out.append(f"L d = 2^-{plan.jump_depth} not below epsilon = {plan.epsilon}")
    return out


def segment_length(model: SymbolicModel, schedule: ScaleSchedule, k: int) -> int:
    return pattern_marks_needed(schedule, model, k, MINUS) * schedule.t[1]


def plan_bridge(model: SymbolicModel, schedule: ScaleSchedule, k: int, epsilon, max_segments: int = 100_000) -> BridgePlan:
    """Smallest segment count ``n`` and, for it, smallest ``ell`` meeting every plan invariant."""
    if not 1 <= k <= schedule.K:
        raise SynthesisError(f"level {k} outside the schedule (K = {schedule.K})")
    epsilon = as_fraction(epsilon)
    a, b, tk = schedule.level(k)
    lam = schedule.lambda_q
    jump_depth = max(1, _eps_radius(epsilon) + 1)
    N_d = jump_depth + 2
    delta = min(abs(lam) / 100, b / 4)
    lo, hi = gamma_window(schedule, k, delta)
    if not lo < hi:
        raise SynthesisError(f"empty ell/T window ({lo}, {hi})")
    L = segment_length(model, schedule, k)
    c = lam - a / 4
    norm = model.phi_norm
    pi_min = 4 * (N_d + tk) * norm / a  # e.nlarge needs pi > pi_min
    for n in range(1, max_segments + 1):
        T = n * L
        # Gamma_2 <= -2b is linear in ell with negative slope coefficient c + 2b
        g_lo = (N_d * c + T * b + 2 * N_d * norm - 2 * b * (T + N_d)) / (c + 2 * b)
        ell = max(N_d, math.floor(lo * T) + 1, math.ceil(g_lo), math.floor(pi_min - T - N_d) + 1)
        while Fraction(ell, T) < hi:
            plan = BridgePlan(k, ell, n, T, N_d, jump_depth, (-3 * b, -2 * b), delta, epsilon)
            if not bridge_plan_violations(model, schedule, plan):
                return plan
            if gamma2(model, schedule, plan) < -3 * b:
                break
            ell += 1
    raise SynthesisError(f"no bridge plan with at most {max_segments} segments")


@dataclass
class BridgeOrbit:
    plan: BridgePlan
    word: str
    tau1: int
    tau2: int
    core: FSegment
    control: list[ControlWitness]
    pattern_prefix: str
    shadow: ShadowResult
    lam: Fraction
    checks: list[Check]

    @property
    def period(self) -> int:
        return len(self.word)


def build_bridge_orbit(model: SymbolicModel, schedule: ScaleSchedule, plan: BridgePlan, pattern: Pattern) -> BridgeOrbit:
    """Assemble ``minus^ell * E_1 ... E_n * minus^N_d``, shadow it and certify the orbit."""
    viol = bridge_plan_violations(model, schedule, plan)
    if viol:
        raise ValueError("invalid bridge plan: " + "; ".join(viol))
    k = plan.k
    a, b, tk = schedule.level(k)
    t1 = schedule.t[1]
    segs: list[FSegment] = []
    entrance = FamilyElement(MINUS * min(plan.ell, BOOKKEEPING_DEPTH))
    pat = pattern
    for _ in range(plan.n_segments):
        seg = synthesize_segment(model, schedule, k, MINUS, pat, entrance)
        segs.append(seg)
        entrance = seg.exit
        pat = pat.shifted(seg.T // t1)
    core = segs[0]
    for seg in segs[1:]:
        core = concatenate(core, seg)
    word = MINUS * plan.ell + core.word + MINUS * plan.N_d
    tau1, tau2 = plan.ell, plan.ell + core.T
    checks = [Check("segment lengths", core.T == plan.T_total, None, f"{core.T} vs {plan.T_total}")]

    point = EventuallyPeriodicPoint(MINUS, word, MINUS, 0)
    po = PseudoOrbit((OrbitSegment(point, len(word)),))
    cert = quasi_string_certificate(model, word, -b)
    checks.append(Check("quasi-hyperbolic string at -b_k", cert.ok, cert.min_e_margin, "; ".join(cert.failures())))
    jump = po.jumps()[0]
    checks.append(Check("closing jump <= d", jump <= plan.d, plan.d - jump))
    res = shadow_symbolic(po, plan.d)
    checks.append(Check("shadow within L d", res.sup_distance <= plan.d, plan.d - res.sup_distance))
    checks.append(Check("period preserved", res.period == plan.period, None, f"{res.period}"))

    lam = model.birkhoff_average(res.orbit.forward(res.period))
    checks.append(_interval_check("exponent in (-4b_k, -a_k)", lam, -4 * b, -a))
    pseudo_avg = model.birkhoff_average(po.word)
    checks.append(_interval_check("pseudo-orbit average in (-3b_k, -b_k)", pseudo_avg, -3 * b, -b))
    checks.append(_interval_check("Gamma_2 in [-3b_k, -2b_k]", gamma2(model, schedule, plan), -3 * b, -2 * b, True))

    # prefix averages along the approach to q stay below lambda + a_1/2
    worst = model.beta * _max_prefix_average(word[: plan.ell])
    bound = schedule.lambda_q + schedule.a[0] / 2
    checks.append(Check("Pliss prefix before tau_1", worst <= bound, bound - worst))

    # control at scales j <= k on [tau_1, tau_2): inherited block partitions and segment cuts
    control = []
    for j in range(1, k + 1):
        bj, tj = schedule.b[j - 1], schedule.t[j]
        if j < k:
            inherited = [w for w in core.certificates if w.t == tj]
            cuts = inherited[0].partition if inherited else None
        else:
            cuts = tuple(itertools.accumulate([0] + [s.T for s in segs]))
        w = ControlWitness(cuts, 2 * bj, tj, core.T) if cuts else check_control(core.word, 2 * bj, tj, core.T, model.beta)
        ok = w is not None and w.validate(core.word, model.beta)
        checks.append(Check(f"control (2b_{j}, t_{j}) on [tau_1, tau_2)", ok))
        if ok:
            control.append(w)
    prefix = pattern.prefix(core.T // t1)
    checks.append(Check("t_1-pattern on [tau_1, tau_2)", follows_pattern(core.word, t1, prefix)))

    e = _eps_radius(plan.epsilon)
    if e >= 0:
        near_u = _minus_runs(word, -e, 0)[:tau1].all()
        near_s = _minus_runs(word, 0, e)[tau2:].all()
    else:
        near_u = near_s = True
    checks.append(Check("[0, tau_1) epsilon-close to the minus-past region", bool(near_u)))
    checks.append(Check("[tau_2, pi) epsilon-close to the minus-future region", bool(near_s)))
    if not all(c.ok for c in checks):
        raise CertificateError(f"bridge orbit at level {k}", checks)
    return BridgeOrbit(plan, word, tau1, tau2, core, control, prefix, res, lam, checks)


def recheck_bridge(
    model: SymbolicModel, schedule: ScaleSchedule, word: str, k: int, tau1: int, tau2: int, epsilon, pattern: Pattern
) -> list[Check]:
    """Re-derive the certificates of a stored bridge orbit from its word alone."""
    a, b, _ = schedule.level(k)
    t1 = schedule.t[1]
    core = word[tau1:tau2]
    lam = model.birkhoff_average(word)
    checks = [_interval_check("exponent in (-4b_k, -a_k)", lam, -4 * b, -a)]
    cert = quasi_string_certificate(model, word, -b)
    checks.append(Check("quasi-hyperbolic string at -b_k", cert.ok, cert.min_e_margin, "; ".join(cert.failures())))
    for j in range(1, k + 1):
        w = check_control(core, 2 * schedule.b[j - 1], schedule.t[j], len(core), model.beta)
        checks.append(Check(f"control (2b_{j}, t_{j}) on [tau_1, tau_2)", w is not None))
    prefix = pattern.prefix(len(core) // t1)
    checks.append(Check("t_1-pattern on [tau_1, tau_2)", len(core) % t1 == 0 and follows_pattern(core, t1, prefix)))
    e = _eps_radius(epsilon)
    near_u = near_s = True
    if e >= 0:
        near_u = bool(_minus_runs(word, -e, 0)[:tau1].all())
        near_s = bool(_minus_runs(word, 0, e)[tau2:].all())
    checks.append(Check("[0, tau_1) epsilon-close to the minus-past region", near_u))
    checks.append(Check("[tau_2, pi) epsilon-close to the minus-future region", near_s))
    return checks


# ---------------------------------------------------------------------------
# descend step


@dataclass(frozen=True)
class DescendPlan:
    n: int
    r: int
    n_d: int
    delta: Fraction
    rho: Fraction
    zeta: Fraction
    M: int
    rotation: int
    density: int
    jump_depth: int
    lam: Fraction
    period_in: int
    r_rule: str = "contract"

    @property
    def period(self) -> int:
        return self.n + self.r + self.n_d

    @property
    def d(self) -> Fraction:
        return Fraction(1, 2**self.jump_depth)


def descend_constants(model: SymbolicModel) -> tuple[Fraction, Fraction]:
    """``rho = 2 / (3|phi|)`` and ``zeta = (2|phi| - tau) / (2|phi|)``."""
    norm = model.phi_norm
    return Fraction(2) / (3 * norm), (2 * norm - model.tau) / (2 * norm)


def r_window(model: SymbolicModel, lam, delta) -> tuple[Fraction, Fraction]:
    norm = model.phi_norm
    return abs(lam + delta) / (2 * norm), abs(lam - delta) / (2 * norm)


def descend_plan_violations(model: SymbolicModel, plan: DescendPlan) -> list[str]:
    out = []
    norm = model.phi_norm
    prop = Fraction(plan.n - plan.n_d, plan.period + plan.n_d)
    need = 1 - 2 * abs(plan.lam) / (3 * norm)
    if not prop > need:
        out.append(f"(n - n_d)/(pi + n_d) = {prop} not above {need}")
    if plan.r_rule == "window":
        lo, hi = r_window(model, plan.lam, plan.delta)
        if not lo < Fraction(plan.r, plan.n) < hi:
            out.append(f"r/n = {Fraction(plan.r, plan.n)} outside ({lo}, {hi})")
    if plan.r < 1:
        out.append("the orbit must visit the blender (r >= 1)")
    return out


def _delta(model: SymbolicModel, lam: Fraction, zeta: Fraction) -> Fraction:
    """``delta < min(t_0, |lam|/100)`` with ``h_1(delta) < lam/4`` and ``h_2(delta) > zeta lam``."""
    norm, tau = model.phi_norm, model.tau
    delta = abs(lam) / 100
    while True:
        h1 = 2 * norm / (2 * norm + abs(lam - delta)) * (lam + delta) / 2 + delta
        h2 = (2 * norm - tau) / (2 * norm + abs(lam + delta)) * lam - Fraction(3, 2) * delta
        if h1 < lam / 4 and h2 > zeta * lam:
            return delta
        delta /= 2


def rising_sun_start(model: SymbolicModel, gamma: str) -> int:
    """First index from which every forward average along ``gamma^Z`` is at most its period average."""
    p = len(gamma)
    s = signed_count(gamma)
    sgn = np.where(_bytes(gamma) == ord(PLUS), 1, -1).astype(np.int64)
    # scaled prefix sums of (phi - lambda) * p / beta
    P = np.concatenate(([0], np.cumsum(sgn * p - s)))[:p]
    return int(np.argmax(P))


def density_block(m: int | None) -> str:
    """Linearised binary de Bruijn word of order ``m``: every length-``m`` word is a
    factor, in the least possible length ``2^m + m - 1``."""
    if not m:
        return ""
    # Lyndon words of length dividing m, in lexicographic order (FKM algorithm)
    a = [0] * (m + 1)
    seq: list[int] = []

    def db(t: int, p: int) -> None:
        if t > m:
            if m % p == 0:
                seq.extend(a[1 : p + 1])
            return
        a[t] = a[t - p]
        db(t + 1, p)
        for j in range(a[t - p] + 1, 2):
            a[t] = j
            db(t + 1, t)

    db(1, 1)
    cycle = "".join(MINUS if v == 0 else PLUS for v in seq)
    return cycle + cycle[: m - 1]


def missing_factors(word: str, m: int) -> list[str]:
    """Length-``m`` words that are not cyclic factors of ``word``."""
    counts = np.bincount(window_codes(word, m), minlength=2**m)
    return [_code_word(c, m) for c in np.flatnonzero(counts == 0).tolist()]


def assemble_descend_word(gamma: str, plan: DescendPlan, density: str = "") -> str:
    """``rot(gamma)^M`` then the density block, ``r`` plus symbols and the return transition."""
    rot = cyclic_extend(gamma, plan.rotation, len(gamma))
    tail = cyclic_extend(rot, -plan.n_d, plan.n_d)
    return rot * plan.M + density + PLUS * plan.r + tail


@dataclass
class DescendResult:
    plan: DescendPlan
    word: str
    lam_in: Fraction
    lam_out: Fraction
    kappa: Fraction
    epsilon: Fraction
    witness: GoodnessWitness
    shadow: ShadowResult
    checks: list[Check]


def descend_step(
    model: SymbolicModel,
    gamma: str,
    epsilon,
    *,
    density_m: int | None = None,
    r_rule: str = "contract",
    max_copies: int = 1_000_000,
) -> DescendResult:
    """An orbit ``(epsilon, 1 - rho |lc(gamma)|)``-good for ``gamma`` with exponent in
    ``(zeta lc(gamma), lc(gamma)/4)``.

    ``r_rule="contract"`` takes the least blender time giving the exponent bound;
    ``r_rule="window"`` keeps ``r/n`` inside the proportional window instead.
    """
    if r_rule not in ("contract", "window"):
        raise ValueError("r_rule must be 'contract' or 'window'")
    epsilon = as_fraction(epsilon)
    lam = model.birkhoff_average(gamma)
    if lam >= 0:
        raise ValueError(f"descend needs a negative exponent, got {lam}")
    beta = model.phi_norm
    rho, zeta = descend_constants(model)
    delta = _delta(model, lam, zeta)
    kappa = 1 - rho * abs(lam)
    e = _eps_radius(epsilon)
    # (L + 1) d < epsilon with L = 1
    jump_depth = max(1, e + 2)
    n_d = jump_depth + 2
    p = len(gamma)
    rotation = rising_sun_start(model, gamma)
    rot = cyclic_extend(gamma, rotation, p)
    # copies of gamma carry its factors forward, so the block is only needed once
    dens = density_block(density_m) if density_m and missing_factors(gamma, density_m) else ""
    S_g = model.phi_sum(rot)
    S_d = model.phi_sum(dens)
    S_t = model.phi_sum(cyclic_extend(rot, -n_d, n_d))
    wlo, whi = r_window(model, lam, delta)
    M = max(1, -(-jump_depth // p))
    while M <= max_copies:
        n = M * p + len(dens)
        base_sum = M * S_g + S_d + S_t
        base_len = n + n_d
        if r_rule == "contract":
            # least r >= 1 with (base_sum + r beta) / (base_len + r) > zeta lam
            rhs = zeta * lam * base_len - base_sum
            r = max(1, math.floor(rhs / (beta - zeta * lam)) + 1)
        else:
            r = math.floor(wlo * n) + 1
            if not Fraction(r, n) < whi:
                M += 1
                continue
        plan = DescendPlan(n, r, n_d, delta, rho, zeta, M, rotation, len(dens), jump_depth, lam, p, r_rule)
        total = base_len + r
        lam_out = (base_sum + r * beta) / total
        # at least one copy of gamma is lost to the window at the blender entry
        good_est = (M - 1) * p
        cheap = (
            zeta * lam < lam_out < lam / 4
            and not descend_plan_violations(model, plan)
            and Fraction(good_est, total) >= kappa
            # a density block may spend at most a quarter of the contraction budget
            and (not dens or lam_out - zeta * lam <= (1 - zeta) * abs(lam) / 4)
        )
        if cheap:
            word = assemble_descend_word(gamma, plan, dens)
            cert = quasi_string_certificate(model, word, lam / 4)
            dense_ok = not density_m or not missing_factors(word, density_m)
            if cert.ok and dense_ok:
                witness = check_good(word, gamma, epsilon, kappa)
                if witness is not None:
                    return _certify_descend(model, gamma, plan, word, dens, density_m, lam, lam_out,
                                            kappa, epsilon, witness, cert)
        M += 1
    raise SynthesisError(f"no descend plan with at most {max_copies} copies of gamma")


def _certify_descend(model, gamma, plan, word, dens, density_m, lam, lam_out, kappa, epsilon, witness, cert):
    checks = [Check("plan invariants", not descend_plan_violations(model, plan),
                    None, "; ".join(descend_plan_violations(model, plan)))]
    rot = cyclic_extend(gamma, plan.rotation, len(gamma))
    checks.append(Check("quasi-hyperbolic string at lambda/4", cert.ok, cert.min_e_margin))
    point = EventuallyPeriodicPoint(rot, word, rot, 0)
    po = PseudoOrbit((OrbitSegment(point, len(word)),))
    jump = po.jumps()[0]
    checks.append(Check("closing jump <= d", jump <= plan.d, plan.d - jump))
    res = shadow_symbolic(po, plan.d)
    checks.append(Check("shadow within L d", res.sup_distance <= plan.d, plan.d - res.sup_distance))
    checks.append(Check("period preserved", res.period == plan.period, None, f"{res.period}"))
    exact = model.birkhoff_average(word)
    checks.append(Check("exponent recount", exact == lam_out, None, f"{exact}"))
    checks.append(_interval_check("exponent in (zeta lambda, lambda/4)", exact, plan.zeta * lam, lam / 4))
    probs = validate_witness(word, gamma, witness)
    checks.append(Check("goodness witness", not probs, witness.proportion - kappa, "; ".join(probs)))
    if density_m:
        missing = missing_factors(word, density_m)
        checks.append(Check(f"all length-{density_m} words occur", not missing, None, ",".join(missing)))
    if not all(c.ok for c in checks):
        raise CertificateError("descend step", checks)
    return DescendResult(plan, word, lam, exact, kappa, epsilon, witness, res, checks)


def descend_step_dense(model: SymbolicModel, gamma: str, epsilon, m: int, **kw) -> DescendResult:
    """``descend_step`` whose output contains every length-``m`` word as a factor."""
    if m < 1:
        raise ValueError("density depth must be positive")
    return descend_step(model, gamma, epsilon, density_m=m, **kw)


# ---------------------------------------------------------------------------
# drivers


@dataclass
class TheoremDResult:
    orbits: list[str]
    steps: list[DescendResult]
    epsilons: list[Fraction]
    lambdas: list[Fraction]
    kappas: list[Fraction]
    decay_ok: list[bool]
    chain: ChainReport
    weak_star: list[Fraction]
    support: dict[int, set[str]]
    M: int

    @property
    def ok(self) -> bool:
        return all(self.decay_ok) and self.chain.valid


def run_theorem_d(
    model: SymbolicModel | None = None,
    steps: int = 8,
    epsilon_schedule=None,
    *,
    density_m: int | None = None,
    r_rule: str = "contract",
    M: int = 3,
    start: str = MINUS,
) -> TheoremDResult:
    """Iterate the descend step from ``start`` (the fixed point ``q`` by default) with
    ``epsilon_n = 2^-n`` by default."""
    model = model or SymbolicModel()
    eps = [as_fraction(x) for x in (epsilon_schedule or [Fraction(1, 2**n) for n in range(steps)])]
    if len(eps) < steps:
        raise ValueError("epsilon schedule shorter than the number of steps")
    eps = eps[:steps]
    orbits = [start]
    results = []
    for n in range(steps):
        res = descend_step(model, orbits[-1], eps[n], density_m=density_m, r_rule=r_rule)
        results.append(res)
        orbits.append(res.word)
    rho, zeta = descend_constants(model)
    lams = [model.birkhoff_average(o) for o in orbits]
    decay = [abs(lams[n]) <= zeta**n * abs(lams[0]) for n in range(len(orbits))]
    kappas = [r.kappa for r in results]
    chain = verify_gikn_chain(orbits, eps, kappas, model, rho, zeta)
    measures = [empirical_measure(o, M) for o in orbits]
    weak = [weak_star_distance(measures[i], measures[i + 1], M) for i in range(steps)]
    support = {1: limit_support(orbits, 1, 1)} if steps else {}
    if density_m and steps:
        support[density_m] = limit_support(orbits, density_m, 1)
    return TheoremDResult(orbits, results, eps, lams, kappas, decay, chain, weak, support, M)


def run_full_support(model: SymbolicModel | None = None, steps: int = 8, epsilon_schedule=None, m: int = 3, **kw) -> TheoremDResult:
    """``run_theorem_d`` with a density block of depth ``m`` in every step."""
    return run_theorem_d(model, steps, epsilon_schedule, density_m=m, **kw)


@dataclass(frozen=True)
class LimitSetApprox:
    K_words: frozenset
    core_words: frozenset
    tau1_tau2: tuple
    depth: int
    longest_core_minus_run: int


def _longest_run(word: str, sym: str = MINUS) -> int:
    runs = [len(r) for r in word.split(PLUS if sym == MINUS else MINUS)]
    return max(runs, default=0)


def limit_set_approx(bridges: list[BridgeOrbit], depth: int = 16) -> LimitSetApprox:
    """Orbit words plus ``q`` when every orbit contains an all-minus window of the
    truncation width; core factors are the width-``2 depth + 1`` factors of the cores."""
    width = 2 * depth + 1
    words = {b.word for b in bridges}
    if all(MINUS * width in b.word + b.word[:width] for b in bridges):
        words.add(MINUS)
    core = set()
    for b in bridges:
        c = b.word[b.tau1 : b.tau2]
        core.update(c[i : i + width] for i in range(len(c) - width + 1))
    run = max((_longest_run(b.word[b.tau1 : b.tau2]) for b in bridges), default=0)
    return LimitSetApprox(frozenset(words), frozenset(core), tuple((b.tau1, b.tau2) for b in bridges), depth, run)


LABELS = ("core", "unstable_of_q", "stable_of_q", "periodic_q")


@dataclass(frozen=True)
class LimitPointClass:
    label: str
    depth: int
    scales: tuple[int, ...]


def classify_limit_point(
    point, truncation_depth: int, schedule: ScaleSchedule | None = None, model: SymbolicModel | None = None
) -> LimitPointClass:
    """Classify a point seen on coordinates ``[-D, D)``; a string is read as the
    window of coordinates ``-D .. D`` (length ``2D + 1``)."""
    D = truncation_depth
    model = model or SymbolicModel()
    schedule = schedule or build_scale_schedule(model, 6)
    if isinstance(point, str):
        if len(point) != 2 * D + 1:
            raise ValueError(f"window must have length {2 * D + 1}")
        left, right = point[:D], point[D : 2 * D]
    else:
        left, right = point.window(-D, 0), point.window(0, D)
    scales = [(2 * schedule.b[j - 1], schedule.t[j]) for j in range(1, schedule.K + 1) if schedule.t[j] <= D]
    ts = tuple(t for _, t in scales)

    def controlled(w: str) -> bool:
        return bool(scales) and all(check_control(w, bb, t, D, model.beta) is not None for bb, t in scales)

    minus = MINUS * D
    if left == minus and right == minus:
        label = "periodic_q"
    elif left == minus and controlled(right):
        label = "unstable_of_q"
    elif right == minus and controlled(left[::-1]):
        label = "stable_of_q"
    elif controlled(right) and controlled(left[::-1]):
        label = "core"
    else:
        label = "unclassified"
    return LimitPointClass(label, D, ts)


def sample_positions(b: BridgeOrbit, t1: int, depth: int) -> list[int]:
    """Positions of a bridge orbit standing for each part of the limit set."""
    pos = [b.plan.ell // 2, b.tau1, b.tau2]
    pos += list(range(b.tau1 + t1, b.tau2 - t1 + 1, t1))
    return pos


@dataclass
class TheoremCResult:
    bridges: list[BridgeOrbit]
    schedule: ScaleSchedule
    epsilons: list[Fraction]
    lambdas: list[Fraction]
    lambda_bounds: list[tuple[Fraction, Fraction]]
    hausdorff: list[Fraction]
    limit: LimitSetApprox
    complexity: list[tuple[int, int, int]]
    classification: dict[str, int]

    @property
    def unclassified(self) -> int:
        return self.classification.get("unclassified", 0)


def run_theorem_c(
    model: SymbolicModel | None = None,
    schedule: ScaleSchedule | None = None,
    K: int = 4,
    pattern_seed: int | None = None,
    epsilon_schedule=None,
    depth: int = 16,
) -> TheoremCResult:
    """Bridge orbits at levels ``1..K`` following one dense pattern, with limit-set tables."""
    model = model or SymbolicModel()
    schedule = schedule or build_scale_schedule(model, K)
    if schedule.K < K:
        raise ValueError(f"schedule depth {schedule.K} below K = {K}")
    eps = [as_fraction(x) for x in (epsilon_schedule or [Fraction(1, 2**k) for k in range(1, K + 1)])]
    pattern = Pattern(seed=pattern_seed)
    bridges = []
    for k in range(1, K + 1):
        plan = plan_bridge(model, schedule, k, eps[k - 1])
        bridges.append(build_bridge_orbit(model, schedule, plan, pattern))
    lams = [b.lam for b in bridges]
    bounds = [(-4 * schedule.b[k - 1], -schedule.a[k - 1]) for k in range(1, K + 1)]
    sets = [OrbitSetApprox([b.word], depth) for b in bridges]
    haus = [hausdorff_distance(sets[i], sets[i + 1]) for i in range(K - 1)]
    limit = limit_set_approx(bridges, depth)
    t1 = schedule.t[1]
    cores = [b.word[b.tau1 : b.tau2] for b in bridges]
    comp = [(j, j * t1 + 1, word_complexity(cores, j * t1 + 1)) for j in range(1, K + 1)]
    counts = {lab: 0 for lab in (*LABELS, "unclassified")}
    for b in bridges:
        x = EventuallyPeriodicPoint.periodic(b.word)
        for p in sample_positions(b, t1, depth):
            counts[classify_limit_point(x.shift(p), depth, schedule, model).label] += 1
    return TheoremCResult(bridges, schedule, eps, lams, bounds, haus, limit, comp, counts)
