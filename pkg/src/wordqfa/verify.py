"""Verification suites: each check reproduces one acceptance criterion and
returns a pass/fail verdict with a short numeric summary."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import mpmath

from .analysis import diophantine_scan, mc_vs_analytic, runtime_profile
from .analytic import (analyze_acceptance, probability_float, sub_r_probability,
                       sub_rprime_probability, to_mpf)
from .assemble import (assemble_exp_machine, assemble_poly_machine, assemble_unbounded_machine,
                       build_mo1qfa, sub_b_machine, sub_r_machine, sub_rprime_machine,
                       transform_overgroup)
from .dfr import TauModel, build_certified, build_named_dfr, certify_dfr
from .groups import (build_coset_table, enumerate_ball, enumerate_words, identity_words,
                     is_identity)
from .linalg import DEFAULT_TOLERANCE, EXACT
from .montecarlo import run_montecarlo, run_trials

Z_EPS = Fraction(1, 8)
F2_EPS = Fraction(1, 4)
ZM_EPS = Fraction(1, 2)
MC_SEED = 20240607


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: str
    elapsed: float
    budget: float
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.key:>2} {status}  {self.title}: {self.detail} "
                f"[{self.elapsed:.1f}s / {self.budget:.0f}s]")

    def to_json(self) -> dict:
        return {"criterion": self.key, "title": self.title, "passed": self.passed,
                "detail": self.detail, "elapsed_s": round(self.elapsed, 3),
                "budget_s": self.budget, "data": self.data}


@dataclass(frozen=True)
class Settings:
    quick: bool = False

    def pick(self, full, quick):
        return quick if self.quick else full


# ---------------------------------------------------------------------------
# shared artifacts


@lru_cache(maxsize=None)
def z_dfr():
    return build_certified("ZAlgebraic")[0]


@lru_cache(maxsize=None)
def f2_dfr():
    return build_certified("F2")[0]


@lru_cache(maxsize=None)
def z_poly():
    return assemble_poly_machine(z_dfr(), Z_EPS)


@lru_cache(maxsize=None)
def zm_poly():
    return assemble_poly_machine(build_certified("Zm", m=4)[0], ZM_EPS)


@lru_cache(maxsize=None)
def f2_exp():
    return assemble_exp_machine(f2_dfr(), F2_EPS)


@lru_cache(maxsize=None)
def overgroup(name: str):
    return transform_overgroup(z_poly(), build_coset_table(z_dfr().group, name))


@lru_cache(maxsize=None)
def shalen_unbounded():
    return assemble_unbounded_machine(build_certified("ShalenZFreeZr", r=2)[0])


@lru_cache(maxsize=None)
def f2_oneway():
    return build_mo1qfa(f2_dfr())


def _as_float(x) -> float:
    return probability_float(x)


def _is_exactly_one(x) -> bool:
    if isinstance(x, Fraction):
        return x == 1
    return False


# ---------------------------------------------------------------------------
# classical oracles for the overgroups, independent of the coset tables


def z_over_2z_identity(word) -> bool:
    """a is 2 and g is 1 in the integers."""
    return sum((2 if abs(c) == 1 else 1) * (1 if c > 0 else -1) for c in word) == 0


def dinf_identity(word) -> bool:
    """a acts as x -> x + 1 and s as x -> -x on the integers."""
    sign, shift = 1, 0
    for c in word:
        if abs(c) == 1:
            shift += sign * (1 if c > 0 else -1)
        else:
            sign = -sign
    return sign == 1 and shift == 0


# ---------------------------------------------------------------------------
# checks


def check_diophantine(s: Settings) -> tuple[bool, str, dict]:
    q_max = s.pick(10**5, 10**4)
    rat = diophantine_scan("1/3", 10)
    zal = diophantine_scan("zalg", q_max)
    root = diophantine_scan("sqrt2", q_max, continued_fraction=True)
    ok = (rat.rational and rat.minimum == 0 and zal.minimum > 0
          and abs(root.fit[1] - 1) <= 0.1 and root.continued_fraction["min_product"] > 0.3)
    detail = (f"1/3 flagged rational; min ||q r|| = {zal.minimum:.3e} (q <= {q_max}); "
              f"sqrt2 exponent D = {root.fit[1]:.4f}, min q||q sqrt2|| = "
              f"{root.continued_fraction['min_product']:.4f}")
    return ok, detail, {"zalg": zal.to_json(), "sqrt2": root.to_json()}


def check_1(s: Settings):
    ok = True
    counts = {}
    for label, machine, max_len in (("Z", z_poly(), s.pick(20, 10)),
                                    ("F2", f2_exp(), s.pick(10, 6))):
        if machine.backend != EXACT:
            return False, f"{label} machine is not on the exact backend", {}
        words = identity_words(machine.group, max_len)
        bad = [w for w in words
               if not _is_exactly_one(analyze_acceptance(machine, w, with_steps=False)
                                      .overall_accept)]
        counts[label] = (len(words), len(bad))
        ok &= not bad
    detail = ", ".join(f"{k}: {n} identity words, {b} not accepted with probability exactly 1"
                       for k, (n, b) in counts.items())
    return ok, detail, {"counts": counts}


def check_2(s: Settings):
    m = z_poly()
    max_len = s.pick(8, 6)
    words = [w for n in range(max_len + 1) for w in enumerate_words(m.group, n)]
    rng = random.Random(2024)
    for _ in range(s.pick(200, 50)):
        n = rng.randint(1, 40)
        words.append(tuple(rng.choice(m.group.alphabet) for _ in range(n)))
    target = 1 - float(Z_EPS)
    worst, tested = 1.0, 0
    for w in words:
        if is_identity(m.group, w):
            continue
        tested += 1
        worst = min(worst, _as_float(analyze_acceptance(m, w, with_steps=False).overall_reject))
    return worst >= target, f"{tested} non-identity words, min rejection {worst:.6f} " \
        f"(need >= {target})", {"tested": tested, "min_reject": worst}


def check_3(s: Settings):
    m = z_poly()
    f = z_dfr()
    eps = DEFAULT_TOLERANCE.eps
    first = analyze_acceptance(m, (1,), with_steps=False).round_success[0]
    reject_a = 1 - to_mpf(first)
    ok = abs(reject_a - mpmath.mpf(1) / 5) <= eps
    reject_a = float(reject_a)
    d = f.d
    worst_ratio = math.inf
    bound = s.pick(200, 50)
    for q in range(1, bound + 1):
        for sign in (1, -1):
            w = (sign,) * q
            p0 = 1 - _as_float(analyze_acceptance(m, w, with_steps=False).round_success[0])
            need = f.tau.value(q) / d
            worst_ratio = min(worst_ratio, p0 / need)
            ok &= p0 >= need - float(eps)
    detail = (f"Pr[r=0 | a] = {reject_a:.12f}; min Pr[r=0]/(tau(|q|)/d) over |q| <= {bound} "
              f"is {worst_ratio:.3f}")
    return ok, detail, {"reject_a": reject_a, "tau": f.tau.describe(), "min_ratio": worst_ratio}


def check_4(s: Settings):
    m = f2_exp()
    f = f2_dfr()
    radius = s.pick(6, 4)
    d = f.d
    ok, worst, count = True, math.inf, 0
    for w, n in enumerate_ball(f.group, radius):
        if n == 0:
            continue
        count += 1
        p0 = _as_float(analyze_acceptance(m, w, with_steps=False).p_rej)
        need = f.tau.value(n) ** 2 / (4 * d ** 3)
        worst = min(worst, p0 / need)
        ok &= p0 >= need
    return ok, f"{count} non-identity elements of B({radius}); min Pr[r=0]/(tau^2/4d^3) = " \
        f"{worst:.3f}", {"elements": count, "min_ratio": worst}


def check_5(s: Settings):
    radius = s.pick(8, 6)
    f = build_named_dfr("F2")
    rep = certify_dfr(f, radius)
    expected = 2 * 3 ** radius - 2
    positive = rep.failure_witness is None and all(v > 0 for _, v, _ in rep.per_length)
    ok = (rep.element_count - 1 == expected and positive and rep.exp_base is not None
          and math.isfinite(rep.exp_base))
    smallest = min(v for _, v, _ in rep.per_length)
    return ok, f"{rep.element_count - 1} non-identity elements (expected {expected}), " \
        f"min gap {smallest:.4e}, exponential base {rep.exp_base:.4f}", \
        {"elements": rep.element_count - 1, "exp_base": rep.exp_base,
         "per_length": [[n, v] for n, v, _ in rep.per_length]}


def check_6(s: Settings):
    trials = s.pick(10**6, 10**5)
    rows = []
    ok = True
    cases = [("R", (10, 1, 1)), ("R", (20, 2, 3)), ("Rprime", (Fraction(1, 2), 4, 1))]
    for kind, params in cases:
        if kind == "R":
            n, mm, y = params
            machine, p = sub_r_machine(mm, y), sub_r_probability(n, mm, y)
        else:
            pp, n, y = params
            machine, p = sub_rprime_machine(pp, y), sub_rprime_probability(pp, n, y)
        stats = run_montecarlo(machine, (1,) * n, trials, MC_SEED)
        sigma = math.sqrt(float(p) * (1 - float(p)) / trials)
        z = (stats.accept_freq - float(p)) / sigma
        ok &= abs(z) <= 3 and stats.step_limited == 0
        rows.append((kind, [str(x) for x in params], float(p), stats.accept_freq, z))
    detail = "; ".join(f"{k}{tuple(pr)}: p={p:.3e} freq={fq:.3e} z={z:+.2f}"
                       for k, pr, p, fq, z in rows)
    return ok, detail, {"rows": rows, "trials": trials}


def check_7(s: Settings):
    max_len = s.pick(10, 6)
    ok = True
    parts = []
    for name, oracle in (("2Z_in_Z", z_over_2z_identity), ("Z_in_Dinf", dinf_identity)):
        m = overgroup(name)
        wrong_accept, worst, count, ident = 0, 1.0, 0, 0
        for n in range(max_len + 1):
            for w in enumerate_words(m.group, n):
                count += 1
                a = analyze_acceptance(m, w, with_steps=False)
                if oracle(w):
                    ident += 1
                    if not _is_exactly_one(a.overall_accept):
                        wrong_accept += 1
                else:
                    worst = min(worst, _as_float(a.overall_reject))
        good = wrong_accept == 0 and worst >= 1 - float(Z_EPS)
        ok &= good
        parts.append(f"{name}: {count} words, {ident} identity all accepted="
                     f"{wrong_accept == 0}, min non-identity rejection {worst:.6f}")
    return ok, "; ".join(parts), {}


def check_8(s: Settings):
    eps = float(DEFAULT_TOLERANCE.eps)
    max_len = s.pick(8, 6)
    ok = True
    parts = []
    for label, m, radius in (("Shalen", shalen_unbounded(), s.pick(4, 3)),
                             ("MO-1QFA", f2_oneway(), s.pick(6, 4))):
        words = identity_words(m.group, max_len)
        worst_acc = min(_as_float(analyze_acceptance(m, w, with_steps=False).overall_accept)
                        for w in words)
        min_rej, count = 1.0, 0
        for w, n in enumerate_ball(m.group, radius):
            if n == 0:
                continue
            count += 1
            min_rej = min(min_rej, _as_float(
                analyze_acceptance(m, w, with_steps=False).overall_reject))
        good = worst_acc >= 1 - eps and min_rej > 1e-10
        ok &= good
        parts.append(f"{label}: {len(words)} identity words, min acceptance 1-{1 - worst_acc:.1e}; "
                     f"{count} non-identity elements of B({radius}), min rejection {min_rej:.3e}")
    return ok, "; ".join(parts), {}


def check_9(s: Settings):
    m = z_poly()
    c2 = TauModel.from_json(m.structure["params"]["tau"]).poly_constants()[1]
    target = math.ceil(c2 - 1e-12) + 2
    poly = runtime_profile(m, list(range(10, s.pick(101, 51), 10)), claim="poly")
    exp = runtime_profile(f2_exp(), list(range(2, s.pick(13, 9), 2)), claim="exp")
    ok = (abs(poly.slope - target) <= 0.5 and not poly.noisy and exp.slope > 0
          and exp.r_squared >= 0.95 and not exp.noisy)
    detail = (f"poly exponent {poly.slope:.3f} (target {target} +- 0.5); exp log-slope "
              f"{exp.slope:.3f} with R^2 {exp.r_squared:.5f}")
    return ok, detail, {"poly": poly.to_json(), "exp": exp.to_json()}


def reconciliation_corpus() -> list:
    """(machine name, machine, word) triples covering every assembled machine kind."""
    zm, z, f2 = zm_poly(), z_poly(), f2_exp()
    o1, o2 = overgroup("2Z_in_Z"), overgroup("Z_in_Dinf")
    sh, mo = shalen_unbounded(), f2_oneway()
    corpus = []
    corpus += [("Zm4-poly", zm, w) for w in
               [(), (1,), (-1,), (1, 1), (1, -1), (1, 1, 1), (1, 1, 1, 1), (-1, -1, -1, -1),
                (1, 1, -1), (1, 1, 1, 1, 1)]]
    corpus += [("Z-poly", z, w) for w in
               [(1,), (-1,), (1, 1), (1, 1, 1), (-1, -1, 1), (1,) * 5, (1, -1, 1, 1)]]
    corpus += [("F2-exp", f2, w) for w in
               [(), (1,), (2,), (1, 2), (1, 2, -1, -2), (2, 2, -1), (1, 1, 1)]]
    corpus += [("Z/2Z-over", o1, w) for w in [(2,), (2, 2), (1, 2), (-2, 1, 1), (2, 2, 2)]]
    corpus += [("Dinf/Z-over", o2, w) for w in [(2,), (1,), (2, 1), (1, 2, 1), (2, 1, 2, 1, 1)]]
    corpus += [("Shalen", sh, w) for w in
               [(), (1,), (1, 3, -1, -3), (1, 2, -1, -2), (3, 1), (2, 3, -2, -3)]]
    corpus += [("F2-oneway", mo, w) for w in
               [(), (1,), (1, 2, -1, -2), (1, -1), (2, 1, 1)]]
    corpus += [("coin-R(1,1)", sub_r_machine(1, 1), (1,) * 10),
               ("coin-R(2,3)", sub_r_machine(2, 3), (1,) * 3),
               ("coin-R'(1/2,1)", sub_rprime_machine(Fraction(1, 2), 1), (1,) * 4),
               ("coin-B(1/3)", sub_b_machine(Fraction(1, 3)), (1, 1)),
               ("coin-R(1,2)", sub_r_machine(1, 2), (1,) * 6)]
    return corpus


def check_10(s: Settings):
    trials = s.pick(10**5, 10**4)
    corpus = reconciliation_corpus()
    failures, worst = [], 0.0
    for name, m, w in corpus:
        r = mc_vs_analytic(m, w, trials, MC_SEED)
        worst = max(worst, abs(r.z_accept), abs(r.z_steps))
        if not r.passed:
            failures.append(f"{name} {m.group.format_word(w) or 'e'} "
                            f"(z={r.z_accept:+.2f}, {r.z_steps:+.2f})")
    name, m, w = corpus[1]
    v1, s1 = run_trials(m, w, trials, MC_SEED)
    v2, s2 = run_trials(m, w, trials, MC_SEED)
    same = bool((v1 == v2).all() and (s1 == s2).all())
    st1 = run_montecarlo(m, w, trials, MC_SEED)
    st2 = run_montecarlo(m, w, trials, MC_SEED)
    same &= st1 == st2
    ok = not failures and same and len(corpus) == 50
    detail = (f"{len(corpus)} words, {len(failures)} outside 3 sigma, max |z| = {worst:.2f}; "
              f"seed replay identical = {same}")
    if failures:
        detail += "; failing: " + ", ".join(failures)
    return ok, detail, {"max_abs_z": worst, "failures": failures}


CHECKS: dict[str, tuple[str, Callable, float]] = {
    "D": ("Diophantine scans", check_diophantine, 120),
    "1": ("perfect completeness", check_1, 120),
    "2": ("one-sided error of the Z machine", check_2, 300),
    "3": ("diagonal round soundness", check_3, 60),
    "4": ("multipass soundness on F2", check_4, 300),
    "5": ("F2 trace-gap scan", check_5, 600),
    "6": ("coin subroutines", check_6, 300),
    "7": ("overgroup transformation", check_7, 600),
    "8": ("unbounded-error machines", check_8, 600),
    "9": ("runtime scaling", check_9, 600),
    "10": ("engine reconciliation", check_10, 600),
}
NUMBERED = [str(i) for i in range(1, 11)]
SUITES = {
    "diophantine": ["D", "3"],
    "gaps": ["4", "5"],
    "machines": ["1", "2", "6", "8", "9", "10"],
    "overgroup": ["7"],
    "all": ["D", *NUMBERED],
}


def run_check(key: str, settings: Settings = Settings()) -> CriterionResult:
    title, fn, budget = CHECKS[key]
    start = time.perf_counter()
    with mpmath.workprec(max(mpmath.mp.prec, DEFAULT_TOLERANCE.precision_bits)):
        ok, detail, data = fn(settings)
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        ok = False
        detail += f"; exceeded the {budget:.0f}s budget"
    return CriterionResult(key, title, bool(ok), detail, elapsed, budget, data)


def run_suite(name: str, quick: bool = False, progress: Callable | None = None) -> list:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    out = []
    for key in SUITES[name]:
        r = run_check(key, Settings(quick))
        if progress is not None:
            progress(r)
        out.append(r)
    return out
