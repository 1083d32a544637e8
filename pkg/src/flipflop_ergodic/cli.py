"""Configuration-driven runs of the drivers, orbit-file verification and reports.

Configs and orbit files are JSON.  Rationals are written as integers or
``"p/q"`` strings; floats are rejected so every reported number traces back to
an exact rational.  Reports serialize fractions as ``{"num", "den"}`` pairs and
carry no timestamps, so identical configs give byte-identical report bodies.

Exit codes: 0 every certificate passes, 2 certificate failure, 3 config error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from decimal import Context, Decimal
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._exact import MINUS, as_fraction, frac_json
from .constructors import (
    CertificateError,
    Check,
    TheoremDResult,
    build_bridge_orbit,
    descend_constants,
    plan_bridge,
    recheck_bridge,
    run_theorem_c,
    run_theorem_d,
)
from .analysis import OrbitSegment, PseudoOrbit
from .flipflop import Pattern, ScaleSchedule, SynthesisError, build_scale_schedule
from .gikn import verify_gikn_chain
from .measures import empirical_measure
from .model import AffineSkewModel, EventuallyPeriodicPoint, SymbolicModel
from .shadowing import ShadowingError, shadow_fiber

FORMAT_VERSION = 1
REPORT_ENV = "FLIPFLOP_ERGODIC_REPORT_PATH"
DRIVERS = ("theorem-c", "theorem-d", "full-support", "bridge", "descend", "verify")
FORMATS = ("json", "csv", "text")
EXIT_OK, EXIT_CERT, EXIT_CONFIG = 0, 2, 3

_KEYS = {
    "driver", "model", "schedule", "steps", "epsilon", "pattern_seed", "report_path", "M",
    "density_m", "levels", "gamma", "orbit_file", "r_rule", "depth", "save_orbits",
}
_MODEL_KEYS = {"beta", "tau", "lambda_u", "lambda_s", "skew"}
_SKEW_KEYS = {"a_plus", "b_plus", "a_minus", "b_minus"}
_SCHEDULE_KEYS = {"K", "b", "a", "lambda_q"}


class ConfigError(ValueError):
    """The config violates a documented key or a model/schedule invariant."""


@dataclass
class RunConfig:
    driver: str
    model: SymbolicModel
    skew: AffineSkewModel | None
    schedule: ScaleSchedule | None
    steps: int
    epsilons: list[Fraction]
    pattern_seed: int | None = None
    report_path: str = "run"
    M: int = 3
    density_m: int | None = None
    levels: list[int] = field(default_factory=list)
    gamma: str = MINUS
    orbit_file: str | None = None
    r_rule: str = "contract"
    depth: int = 16
    save_orbits: bool = False

    def normalized(self) -> dict:
        """Every run parameter (the output location excluded) in canonical form."""
        m = self.model
        out = {
            "driver": self.driver,
            "model": {"beta": m.beta, "tau": m.tau, "lambda_u": m.lambda_u, "lambda_s": m.lambda_s},
            "steps": self.steps,
            "epsilon": self.epsilons,
            "pattern_seed": self.pattern_seed,
            "M": self.M,
            "density_m": self.density_m,
            "r_rule": self.r_rule,
            "depth": self.depth,
        }
        if self.skew is not None:
            s = self.skew
            out["model"]["skew"] = {"a_plus": s.a_plus, "b_plus": s.b_plus, "a_minus": s.a_minus, "b_minus": s.b_minus}
        if self.schedule is not None:
            sc = self.schedule
            out["schedule"] = {"K": sc.K, "a": list(sc.a), "b": list(sc.b), "t": list(sc.t), "lambda_q": sc.lambda_q}
        if self.driver == "bridge":
            out["levels"] = self.levels
        if self.driver == "descend":
            out["gamma_sha256"] = _sha(self.gamma)
            out["gamma_period"] = len(self.gamma)
        if self.driver == "verify":
            out["orbit_file"] = self.orbit_file
        return out


# ---------------------------------------------------------------------------
# config loading


def _frac(value, where: str) -> Fraction:
    try:
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _int(value, where: str, lo: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{where}: expected an integer >= {lo}, got {value!r}")
    return value


def _unknown(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def _epsilons(rule, n: int, start: int) -> list[Fraction]:
    if rule is None:
        rule = {"rule": "dyadic", "start": start}
    if isinstance(rule, list):
        eps = [_frac(x, "epsilon") for x in rule]
        if len(eps) < n:
            raise ConfigError(f"epsilon: need {n} values, got {len(eps)}")
        eps = eps[:n]
    elif isinstance(rule, dict):
        _unknown(rule, {"rule", "start"}, "epsilon")
        if rule.get("rule", "dyadic") != "dyadic":
            raise ConfigError("epsilon.rule: only 'dyadic' is supported")
        s = rule.get("start", start)
        if isinstance(s, bool) or not isinstance(s, int):
            raise ConfigError("epsilon.start: expected an integer")
        eps = [Fraction(1, 2 ** (s + i)) if s + i >= 0 else Fraction(2 ** -(s + i)) for i in range(n)]
    else:
        raise ConfigError("epsilon: expected a list of rationals or a rule object")
    if any(e <= 0 for e in eps):
        raise ConfigError("epsilon: values must be positive")
    return eps


def load_config(source) -> RunConfig:
    """Parse and validate a config (path, JSON text or dict).  Model and schedule
    invariants are re-checked here so a bad config fails before any driver runs."""
    if isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _unknown(raw, _KEYS, "config")
    driver = raw.get("driver")
    if driver not in DRIVERS:
        raise ConfigError(f"driver: expected one of {list(DRIVERS)}, got {driver!r}")

    mraw = raw.get("model", {})
    if not isinstance(mraw, dict):
        raise ConfigError("model: expected an object")
    _unknown(mraw, _MODEL_KEYS, "model")
    params = {k: _frac(mraw[k], f"model.{k}") for k in ("beta", "tau", "lambda_u", "lambda_s") if k in mraw}
    try:
        model = SymbolicModel(**params)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    bad = model.violations()
    if bad:
        raise ConfigError("model: " + "; ".join(bad))
    skew = None
    if mraw.get("skew") is not None:
        sraw = mraw["skew"]
        if not isinstance(sraw, dict):
            raise ConfigError("model.skew: expected an object")
        _unknown(sraw, _SKEW_KEYS, "model.skew")
        try:
            skew = AffineSkewModel(model, **{k: _frac(v, f"model.skew.{k}") for k, v in sraw.items()})
        except ValueError as exc:
            raise ConfigError(f"model.skew: {exc}") from None

    steps = _int(raw.get("steps", 8), "steps")
    seed = raw.get("pattern_seed")
    if seed is not None:
        _int(seed, "pattern_seed")
    M = _int(raw.get("M", 3), "M", 1)
    depth = _int(raw.get("depth", 16), "depth", 1)
    density_m = raw.get("density_m")
    if driver == "full-support" and density_m is None:
        density_m = 3
    if density_m is not None:
        density_m = _int(density_m, "density_m", 1)
    r_rule = raw.get("r_rule", "contract")
    if r_rule not in ("contract", "window"):
        raise ConfigError("r_rule: expected 'contract' or 'window'")
    report_path = os.environ.get(REPORT_ENV) or raw.get("report_path") or f"runs/{driver}"
    save = raw.get("save_orbits", False)
    if not isinstance(save, bool):
        raise ConfigError("save_orbits: expected true or false")

    schedule = None
    levels: list[int] = []
    if driver in ("theorem-c", "bridge"):
        sraw = raw.get("schedule", {})
        if not isinstance(sraw, dict):
            raise ConfigError("schedule: expected an object")
        _unknown(sraw, _SCHEDULE_KEYS, "schedule")
        K = _int(sraw.get("K", 4), "schedule.K", 1)
        b = [_frac(x, "schedule.b") for x in sraw["b"]] if "b" in sraw else None
        a = [_frac(x, "schedule.a") for x in sraw["a"]] if "a" in sraw else None
        lq = _frac(sraw["lambda_q"], "schedule.lambda_q") if "lambda_q" in sraw else None
        if b is not None and len(b) != K or a is not None and len(a) != K:
            raise ConfigError(f"schedule: rate lists must have K = {K} entries")
        if b is not None:
            # rate invariants first, so a bad rate is named before any scale search
            a_chk = a if a is not None else [Fraction(3, 4) * x for x in b]
            try:
                ScaleSchedule(a_chk, b, [2**i for i in range(K + 1)], lq if lq is not None else -model.beta)
            except ValueError as exc:
                raise ConfigError(f"schedule: {exc}") from None
        try:
            schedule = build_scale_schedule(model, K, lq, b, a)
        except (ValueError, SynthesisError) as exc:
            raise ConfigError(f"schedule: {exc}") from None
        if driver == "bridge":
            levels = raw.get("levels", list(range(1, K + 1)))
            if not isinstance(levels, list) or not levels:
                raise ConfigError("levels: expected a non-empty list")
            for k in levels:
                if _int(k, "levels", 1) > K:
                    raise ConfigError(f"levels: {k} exceeds schedule K = {K}")
        steps = K if driver == "theorem-c" else len(levels)

    gamma = raw.get("gamma", MINUS)
    if not isinstance(gamma, str) or not gamma or set(gamma) - {"+", "-"}:
        raise ConfigError("gamma: expected a non-empty word over '+' and '-'")
    if driver == "descend" and model.birkhoff_average(gamma) >= 0:
        raise ConfigError("gamma: the descend step needs a negative centre exponent")
    orbit_file = raw.get("orbit_file")
    if driver == "verify" and not orbit_file:
        raise ConfigError("orbit_file: required by the verify driver")

    if driver == "theorem-c":
        eps = _epsilons(raw.get("epsilon"), steps, 1)
    elif driver == "bridge":
        eps = _epsilons(raw.get("epsilon"), max(levels), 1)
    elif driver == "verify":
        eps = []
    else:
        eps = _epsilons(raw.get("epsilon"), steps, 0)
    return RunConfig(driver, model, skew, schedule, steps, eps, seed, report_path, M, density_m,
                     levels, gamma, orbit_file, r_rule, depth, save)


# ---------------------------------------------------------------------------
# serialization helpers


def _sha(word: str) -> str:
    return hashlib.sha256(word.encode("ascii")).hexdigest()


def decimal_str(x: Fraction, digits: int = 12) -> str:
    """Correctly rounded decimal of an exact rational (no binary floats involved)."""
    ctx = Context(prec=digits)
    return format(ctx.divide(Decimal(x.numerator), Decimal(x.denominator)), "g")


def to_jsonable(x):
    if isinstance(x, Fraction):
        return frac_json(x)
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(to_jsonable(v) for v in x)
    return x


def from_jsonable(x):
    if isinstance(x, dict):
        if set(x) == {"num", "den"}:
            return Fraction(x["num"], x["den"])
        return {k: from_jsonable(v) for k, v in x.items()}
    if isinstance(x, list):
        return [from_jsonable(v) for v in x]
    return x


@contextlib.contextmanager
def _unbounded_ints():
    # exact dyadic margins can have numerators far beyond the default digit limit
    get = getattr(sys, "get_int_max_str_digits", None)
    old = get() if get else None
    if get:
        sys.set_int_max_str_digits(0)
    try:
        yield
    finally:
        if get:
            sys.set_int_max_str_digits(old)


def dumps(obj) -> str:
    with _unbounded_ints():
        return json.dumps(to_jsonable(obj), sort_keys=True, indent=1) + "\n"


def loads(text: str):
    with _unbounded_ints():
        return json.loads(text)


def _check_record(c: Check) -> dict:
    return {"name": c.name, "ok": bool(c.ok), "margin": c.margin, "detail": c.detail}


def _digest(checks: list[dict]) -> str:
    return hashlib.sha256(dumps(checks).encode()).hexdigest()


def _value(x) -> dict | None:
    """Exact value plus its decimal rendering."""
    if x is None:
        return None
    return {"exact": x, "decimal": decimal_str(x)}


def _accept(name: str, ok: bool, margin: Fraction | None = None) -> dict:
    return {"name": name, "ok": bool(ok), "margin": margin}


# ---------------------------------------------------------------------------
# drivers


def _chain_rows(res: TheoremDResult) -> list[dict]:
    rows = []
    for n, step in enumerate(res.steps):
        checks = [_check_record(c) for c in step.checks]
        p = step.plan
        rows.append({
            "step": n + 1,
            "period": len(step.word),
            "lambda": _value(step.lam_out),
            "kappa": _value(step.kappa),
            "epsilon": _value(step.epsilon),
            "weak_star": _value(res.weak_star[n]),
            "hausdorff": None,
            "plan": {"M": p.M, "r": p.r, "n_d": p.n_d, "rotation": p.rotation, "density": p.density,
                     "jump_depth": p.jump_depth, "r_rule": p.r_rule},
            "goodness": {"fiber_count": step.witness.fiber_count, "proportion": step.witness.proportion},
            "word_sha256": _sha(step.word),
            "certificate_sha256": _digest(checks),
            "checks": checks,
        })
    return rows


def _chain_acceptance(cfg: RunConfig, res: TheoremDResult) -> tuple[list[dict], dict]:
    model = cfg.model
    rho, zeta = descend_constants(model)
    n = len(res.steps)
    lams = res.lambdas
    acc = [_accept("every step certificate passes", all(c.ok for s in res.steps for c in s.checks))]
    for i in range(n):
        acc.append(_accept(f"lambda_{i + 1} > zeta lambda_{i}", lams[i + 1] > zeta * lams[i], lams[i + 1] - zeta * lams[i]))
    bound = zeta**n * abs(lams[0])
    acc.append(_accept(f"|lambda_{n}| <= zeta^{n} |lambda_0|", abs(lams[-1]) <= bound, bound - abs(lams[-1])))
    acc.append(_accept("GIKN chain re-validates", res.chain.valid))
    acc.append(_accept("decay certificate", bool(res.chain.decay_ok)))
    if n >= 8:
        last = res.weak_star[-1]
        acc.append(_accept(f"weak* d(mu_{n - 1}, mu_{n}) < 1/20", last < Fraction(1, 20), Fraction(1, 20) - last))
    if n:
        acc.append(_accept("limit support at m = 1 has both symbols", res.support.get(1) == {"+", "-"}))
    if cfg.density_m:
        m = cfg.density_m
        mu = empirical_measure(res.orbits[-1], m)
        low = min(mu[w] for w in _words(m))
        acc.append(_accept(f"every length-{m} word has positive frequency", low > 0, low))
    summary = {
        "periods": res.chain.periods,
        "lambdas": lams,
        "rho": rho,
        "zeta": zeta,
        "partial_kappa": res.chain.partial_kappa,
        "partial_epsilon": res.chain.partial_eps,
        "product_lower_bound": res.chain.product_lower_bound,
        "divergence_flag": res.chain.divergence_flag,
        "chain_failures": res.chain.failures,
        "support": {str(m): sorted(ws) for m, ws in res.support.items()},
    }
    return acc, summary


def _words(m: int) -> list[str]:
    return [format(i, f"0{m}b").replace("0", "-").replace("1", "+") for i in range(2**m)]


def _run_chain(cfg: RunConfig) -> tuple[list[dict], list[dict], dict, dict | None]:
    res = run_theorem_d(cfg.model, cfg.steps, cfg.epsilons, density_m=cfg.density_m, r_rule=cfg.r_rule,
                        M=cfg.M, start=cfg.gamma)
    acc, summary = _chain_acceptance(cfg, res)
    orbit_doc = None
    if cfg.save_orbits:
        orbit_doc = {
            "format_version": FORMAT_VERSION,
            "kind": "chain",
            "model": cfg.normalized()["model"],
            "orbits": res.orbits,
            "epsilons": res.epsilons,
            "kappas": res.kappas,
            "density_m": cfg.density_m,
            "certificates": [[_check_record(c) for c in s.checks] for s in res.steps],
        }
    return _chain_rows(res), acc, summary, orbit_doc


def _fiber_checks(skew: AffineSkewModel | None, word: str, d: Fraction) -> list[Check]:
    if skew is None:
        return []
    po = PseudoOrbit((OrbitSegment(EventuallyPeriodicPoint(MINUS, word, MINUS, 0), len(word)),))
    try:
        res = shadow_fiber(skew, po, d)
    except ShadowingError as exc:
        return [Check("fiber fixed point", False, None, str(exc))]
    return [Check("fiber fixed point residual = 0", res.residual == 0, res.residual)]


def _bridge_rows(cfg: RunConfig, bridges, haus: list[Fraction]) -> list[dict]:
    rows = []
    for i, b in enumerate(bridges):
        checks = [_check_record(c) for c in b.checks + _fiber_checks(cfg.skew, b.word, b.plan.d)]
        a, bk, tk = cfg.schedule.level(b.plan.k)
        rows.append({
            "step": b.plan.k,
            "period": b.period,
            "lambda": _value(b.lam),
            "lambda_window": [-4 * bk, -a],
            "kappa": None,
            "epsilon": _value(b.plan.epsilon),
            "weak_star": None,
            "hausdorff": _value(haus[i]) if i < len(haus) else None,
            "tau1": b.tau1,
            "tau2": b.tau2,
            "plan": {"ell": b.plan.ell, "n_segments": b.plan.n_segments, "N_d": b.plan.N_d,
                     "jump_depth": b.plan.jump_depth, "delta": b.plan.delta},
            "word_sha256": _sha(b.word),
            "certificate_sha256": _digest(checks),
            "checks": checks,
        })
    return rows


def _bridge_doc(cfg: RunConfig, bridges) -> dict:
    sc = cfg.schedule
    return {
        "format_version": FORMAT_VERSION,
        "kind": "bridges",
        "model": cfg.normalized()["model"],
        "schedule": {"a": list(sc.a), "b": list(sc.b), "t": list(sc.t), "lambda_q": sc.lambda_q},
        "pattern_seed": cfg.pattern_seed,
        "bridges": [{"k": b.plan.k, "word": b.word, "tau1": b.tau1, "tau2": b.tau2, "epsilon": b.plan.epsilon,
                     "certificates": [_check_record(c) for c in b.checks]} for b in bridges],
    }


def _run_theorem_c(cfg: RunConfig):
    res = run_theorem_c(cfg.model, cfg.schedule, cfg.schedule.K, cfg.pattern_seed, cfg.epsilons, cfg.depth)
    rows = _bridge_rows(cfg, res.bridges, res.hausdorff)
    h = res.hausdorff
    lim = res.limit
    acc = [_accept("every bridge certificate passes", all(c["ok"] for r in rows for c in r["checks"]))]
    for (lam, (lo, hi)), k in zip(zip(res.lambdas, res.lambda_bounds), range(1, len(res.lambdas) + 1)):
        acc.append(_accept(f"-4b_{k} < lambda_{k} < -a_{k}", lo < lam < hi, min(lam - lo, hi - lam)))
    acc.append(_accept("Hausdorff distances non-increasing", all(y <= x for x, y in zip(h, h[1:]))))
    acc.append(_accept("q word in K_words", MINUS in lim.K_words))
    acc.append(_accept("core minus runs shorter than the truncation depth",
                       lim.longest_core_minus_run < lim.depth, Fraction(lim.depth - lim.longest_core_minus_run)))
    for j, n, c in res.complexity:
        acc.append(_accept(f"complexity at pattern depth {j} >= 2^{j}", c >= 2**j, Fraction(c - 2**j)))
    acc.append(_accept("zero unclassified limit words", res.unclassified == 0))
    summary = {
        "hausdorff": h,
        "complexity": [{"j": j, "n": n, "count": c} for j, n, c in res.complexity],
        "classification": res.classification,
        "K_words_sha256": sorted(_sha(w) for w in lim.K_words),
        "core_word_count": len(lim.core_words),
        "longest_core_minus_run": lim.longest_core_minus_run,
        "truncation_depth": lim.depth,
    }
    doc = _bridge_doc(cfg, res.bridges) if cfg.save_orbits else None
    return rows, acc, summary, doc


def _run_bridge(cfg: RunConfig):
    pattern = Pattern(seed=cfg.pattern_seed)
    bridges = []
    for k in cfg.levels:
        plan = plan_bridge(cfg.model, cfg.schedule, k, cfg.epsilons[k - 1])
        bridges.append(build_bridge_orbit(cfg.model, cfg.schedule, plan, pattern))
    rows = _bridge_rows(cfg, bridges, [])
    acc = [_accept(f"level {r['step']} certificates pass", all(c["ok"] for c in r["checks"])) for r in rows]
    doc = _bridge_doc(cfg, bridges) if cfg.save_orbits else None
    return rows, acc, {"levels": cfg.levels}, doc


# ---------------------------------------------------------------------------
# orbit files


def verify_orbit_doc(doc: dict) -> tuple[list[dict], list[dict], dict]:
    """Re-check a stored orbit file from its words alone."""
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"orbit file: expected format_version {FORMAT_VERSION}")
    doc = from_jsonable(doc)
    try:
        mraw = dict(doc["model"])
        skew = mraw.pop("skew", None)
        model = SymbolicModel(**mraw)
        skew = AffineSkewModel(model, **skew) if skew else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"orbit file model: {exc}") from None
    kind = doc.get("kind")
    rows: list[dict] = []
    acc: list[dict] = []
    if kind == "chain":
        orbits, eps, kap = doc["orbits"], doc["epsilons"], doc["kappas"]
        rho, zeta = descend_constants(model)
        rep = verify_gikn_chain(orbits, eps, kap, model, rho, zeta)
        lams = [model.birkhoff_average(o) for o in orbits]
        for i in range(1, len(orbits)):
            checks = [Check("lambda contracts by zeta", lams[i] > zeta * lams[i - 1], lams[i] - zeta * lams[i - 1]),
                      Check("goodness witness re-validates", rep.witnesses[i - 1] is not None and
                            not any(f.startswith(f"pair {i - 1}:") for f in rep.failures))]
            m = doc.get("density_m")
            if m:
                mu = empirical_measure(orbits[i], m)
                low = min(mu[w] for w in _words(m))
                checks.append(Check(f"every length-{m} word occurs", low > 0, low))
            recs = [_check_record(c) for c in checks]
            rows.append({"step": i, "period": len(orbits[i]), "lambda": _value(lams[i]), "kappa": _value(kap[i - 1]),
                         "epsilon": _value(eps[i - 1]), "weak_star": None, "hausdorff": None,
                         "word_sha256": _sha(orbits[i]), "certificate_sha256": _digest(recs), "checks": recs})
        acc.append(_accept("GIKN chain re-validates", rep.valid))
        acc.append(_accept("decay certificate", bool(rep.decay_ok)))
        acc += [_accept(r["checks"][0]["name"] + f" at step {r['step']}", r["checks"][0]["ok"]) for r in rows]
        summary = {"periods": rep.periods, "chain_failures": rep.failures, "product_lower_bound": rep.product_lower_bound}
    elif kind == "bridges":
        s = doc["schedule"]
        try:
            schedule = ScaleSchedule(s["a"], s["b"], s["t"], s["lambda_q"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"orbit file schedule: {exc}") from None
        pattern = Pattern(seed=doc.get("pattern_seed"))
        for rec in doc["bridges"]:
            word, k = rec["word"], rec["k"]
            checks = recheck_bridge(model, schedule, word, k, rec["tau1"], rec["tau2"], rec["epsilon"], pattern)
            if skew is not None:
                checks += _fiber_checks(skew, word, rec["epsilon"])
            recs = [_check_record(c) for c in checks]
            rows.append({"step": k, "period": len(word), "lambda": _value(model.birkhoff_average(word)),
                         "kappa": None, "epsilon": _value(rec["epsilon"]), "weak_star": None, "hausdorff": None,
                         "word_sha256": _sha(word), "certificate_sha256": _digest(recs), "checks": recs})
            acc.append(_accept(f"level {k} certificates re-validate", all(c.ok for c in checks)))
        summary = {"levels": [r["step"] for r in rows]}
    else:
        raise ConfigError(f"orbit file: unknown kind {kind!r}")
    return rows, acc, summary


def load_orbit_file(path) -> dict:
    try:
        return loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"orbit file {path}: {exc}") from None


# ---------------------------------------------------------------------------
# run / emit


@dataclass
class RunOutcome:
    report: dict
    orbit_doc: dict | None = None

    @property
    def ok(self) -> bool:
        return bool(self.report["ok"])

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.ok else EXIT_CERT


def run_config(config) -> RunOutcome:
    """Run the configured driver.  Certificate failures produce a report with a
    failure record rather than an exception; config errors raise ``ConfigError``."""
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    rows: list[dict] = []
    acc: list[dict] = []
    summary: dict = {}
    doc = None
    failure = None
    try:
        if cfg.driver in ("theorem-d", "full-support", "descend"):
            rows, acc, summary, doc = _run_chain(cfg)
        elif cfg.driver == "theorem-c":
            rows, acc, summary, doc = _run_theorem_c(cfg)
        elif cfg.driver == "bridge":
            rows, acc, summary, doc = _run_bridge(cfg)
        else:
            rows, acc, summary = verify_orbit_doc(load_orbit_file(cfg.orbit_file))
    except CertificateError as exc:
        failure = {"error": "certificate", "message": str(exc), "checks": [_check_record(c) for c in exc.checks]}
    except (SynthesisError, ShadowingError) as exc:
        failure = {"error": type(exc).__name__, "message": str(exc)}
    ok = failure is None and bool(acc) and all(a["ok"] for a in acc)
    report = {
        "format_version": FORMAT_VERSION,
        "driver": cfg.driver,
        "config": cfg.normalized(),
        "environment": {"package": "flipflop_ergodic", "version": __version__, "seed": cfg.pattern_seed},
        "rows": rows,
        "summary": summary,
        "acceptance": acc,
        "failure": failure,
        "ok": ok,
    }
    return RunOutcome(to_jsonable(report), doc)


_CSV_COLUMNS = ("step", "period", "lambda", "kappa", "epsilon", "weak_star", "hausdorff")


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_COLUMNS)
    for row in report["rows"]:
        out = []
        for col in _CSV_COLUMNS:
            v = row.get(col)
            out.append(v["decimal"] if isinstance(v, dict) else "" if v is None else v)
        w.writerow(out)
    return buf.getvalue()


def _margin_str(m) -> str:
    if m is None:
        return ""
    x = from_jsonable(m)
    return f"margin {decimal_str(x, 6)}" if isinstance(x, Fraction) else f"margin {x}"


def render_text(report: dict) -> str:
    lines = [f"driver {report['driver']}  version {report['environment']['version']}  "
             f"seed {report['environment']['seed']}  {'PASS' if report['ok'] else 'FAIL'}"]
    table = [list(_CSV_COLUMNS)]
    for row in report["rows"]:
        table.append([row[c]["decimal"] if isinstance(row.get(c), dict) else "" if row.get(c) is None
                      else str(row[c]) for c in _CSV_COLUMNS])
    widths = [max(len(r[i]) for r in table) for i in range(len(_CSV_COLUMNS))]
    lines += ["  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)).rstrip() for r in table]
    bad = [(row["step"], c) for row in report["rows"] for c in row["checks"] if not c["ok"]]
    for step, c in bad:
        lines.append(f"FAIL step {step}: {c['name']} {_margin_str(c['margin'])}".rstrip())
    lines.append("acceptance")
    width = max((len(a["name"]) for a in report["acceptance"]), default=0)
    for a in report["acceptance"]:
        tag = "PASS" if a["ok"] else "FAIL"
        lines.append(f"  {tag}  {a['name'].ljust(width)}  {_margin_str(a['margin'])}".rstrip())
    if report.get("failure"):
        f = report["failure"]
        lines.append(f"FAIL driver: {f['message']}")
        for c in f.get("checks", []):
            if not c["ok"]:
                lines.append(f"  FAIL  {c['name']}  {_margin_str(c['margin'])}".rstrip())
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown format {fmt!r}")


def emit_report(report: dict, fmt: str, run_dir) -> Path:
    """Write ``report.<ext>`` into ``run_dir`` and return its path."""
    ext = {"json": "json", "csv": "csv", "text": "txt"}[fmt]
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    out = path / f"report.{ext}"
    out.write_text(render(report, fmt))
    return out


# ---------------------------------------------------------------------------
# command line


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flipflop-ergodic", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a driver from a JSON config")
    r.add_argument("config", nargs="+", help="config file(s); each run writes to its own report path")
    r.add_argument("--out", help="run directory (overrides the config and the environment)")
    v = sub.add_parser("verify", help="re-check a saved orbit file")
    v.add_argument("orbit_file")
    v.add_argument("--out", help="run directory for the verification report")
    p = sub.add_parser("report", help="render a saved report")
    p.add_argument("run_dir")
    p.add_argument("--format", choices=FORMATS, default="text")
    return ap


def _finish(outcome: RunOutcome, run_dir: str | None) -> int:
    if run_dir:
        emit_report(outcome.report, "json", run_dir)
        if outcome.orbit_doc is not None:
            (Path(run_dir) / "orbits.json").write_text(dumps(outcome.orbit_doc))
    sys.stdout.write(render_text(outcome.report))
    return outcome.exit_code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            code = EXIT_OK
            for path in args.config:
                cfg = load_config(Path(path))
                if args.out:
                    cfg.report_path = args.out if len(args.config) == 1 else str(Path(args.out) / Path(path).stem)
                code = max(code, _finish(run_config(cfg), cfg.report_path))
            return code
        if args.command == "verify":
            cfg = load_config({"driver": "verify", "orbit_file": args.orbit_file})
            return _finish(run_config(cfg), args.out or os.environ.get(REPORT_ENV))
        report = loads((Path(args.run_dir) / "report.json").read_text())
        out = emit_report(report, args.format, args.run_dir)
        sys.stdout.write(out.read_text())
        return EXIT_OK if report.get("ok") else EXIT_CERT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
