"""Empirical checks of the quantitative lemmas: Diophantine scans, trace-gap
scans with envelope fits, runtime profiles and engine reconciliation."""

from __future__ import annotations

import ast
import csv
import io
import itertools
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from .analytic import AnalysisUnavailable, analyze_acceptance, probability_float
from .dfr import (CertificationError, CertificationReport, Dfr, TauModel, calibrate_tau,
                  certify_dfr, element_gap)
from .envelopes import fit_power_envelope, linear_fit, loglog_slope
from .groups import GroupPresentation
from .linalg import DEFAULT_TOLERANCE, ToleranceProfile
from .machine import QcfaMachine
from .montecarlo import DEFAULT_STEP_LIMIT, run_montecarlo

MAX_SCAN = 10**7
_CHUNK = 1 << 20


class PrecisionError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# scalar specifications

SCALAR_ALIASES = {
    "zalg": "acos(3/5)/(2*pi)",
    "sqrt2": "sqrt(2)",
    "sqrt3": "sqrt(3)",
    "sqrt5": "sqrt(5)",
    "golden": "(1+sqrt(5))/2",
}
_FUNCTIONS = {
    "sqrt": mpmath.sqrt, "cbrt": mpmath.cbrt, "acos": mpmath.acos, "asin": mpmath.asin,
    "atan": mpmath.atan, "cos": mpmath.cos, "sin": mpmath.sin, "exp": mpmath.exp,
    "log": mpmath.log,
}
_CONSTANTS = {"pi": lambda: +mpmath.pi, "e": lambda: +mpmath.e}
_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


@dataclass(frozen=True)
class ScalarSpec:
    """A real number given by an arithmetic expression over mpmath functions."""

    text: str

    @property
    def expression(self) -> str:
        return SCALAR_ALIASES.get(self.text.strip(), self.text.strip())

    def rational(self) -> Fraction | None:
        """The exact value when the expression is rational arithmetic, else None."""
        try:
            v = _evaluate(ast.parse(self.expression, mode="eval").body, exact=True)
        except _NotRational:
            return None
        return v

    def value(self, prec: int):
        with mpmath.workprec(prec):
            v = _evaluate(ast.parse(self.expression, mode="eval").body, exact=False)
            return mpmath.mpf(v)


class _NotRational(Exception):
    pass


def _evaluate(node, exact: bool):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        if exact:
            return Fraction(str(node.value)) if isinstance(node.value, float) else \
                Fraction(node.value)
        return mpmath.mpf(node.value) if isinstance(node.value, int) else \
            mpmath.mpf(str(node.value))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _evaluate(node.operand, exact)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        a, b = _evaluate(node.left, exact), _evaluate(node.right, exact)
        if exact and isinstance(node.op, ast.Pow):
            if b.denominator != 1:
                raise _NotRational()
            return a ** int(b)
        return _BINARY[type(node.op)](a, b)
    if isinstance(node, ast.Name) and node.id in _CONSTANTS:
        if exact:
            raise _NotRational()
        return _CONSTANTS[node.id]()
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCTIONS and len(node.args) == 1 and not node.keywords:
        if exact:
            raise _NotRational()
        return _FUNCTIONS[node.func.id](_evaluate(node.args[0], exact))
    raise ValueError(f"unsupported scalar expression: {ast.dump(node)}")


def nearest_integer_distance(x) -> object:
    return abs(x - mpmath.nint(x))


# ---------------------------------------------------------------------------
# Diophantine scans


@dataclass
class DiophantineReport:
    alpha: str
    q_max: int
    precision_bits: int
    worst_pairs: list  # (q, distance) with the smallest distances, ascending
    records: list  # (q, distance) where the distance is a new running minimum
    rational: bool
    fit: tuple | None  # (c, D) with distance >= c q^-D on the scanned range
    continued_fraction: dict | None = None

    @property
    def minimum(self) -> float:
        return self.worst_pairs[0][1] if self.worst_pairs else math.inf

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "q_max": self.q_max,
            "precision_bits": self.precision_bits,
            "rational": self.rational,
            "worst_pairs": [[q, float(v)] for q, v in self.worst_pairs],
            "records": [[q, float(v)] for q, v in self.records],
            "fit": None if self.fit is None else {"c": self.fit[0], "D": self.fit[1]},
            "continued_fraction": self.continued_fraction,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["q", "distance", "record"])
        recs = {q for q, _ in self.records}
        for q, v in sorted(set(self.worst_pairs) | set(self.records)):
            w.writerow([q, float(v), q in recs])
        return buf.getvalue()


def diophantine_scan(alpha: str | ScalarSpec, q_max: int, worst: int = 10,
                     tol: ToleranceProfile = DEFAULT_TOLERANCE,
                     continued_fraction: bool = False) -> DiophantineReport:
    """Distances ||q alpha|| for 1 <= q <= q_max with a certified lower envelope.

    Irrational inputs are screened in 64-bit fixed point; every candidate for a
    running minimum or a worst pair is then recomputed at full precision."""
    spec = alpha if isinstance(alpha, ScalarSpec) else ScalarSpec(str(alpha))
    if not 1 <= q_max <= MAX_SCAN:
        raise ValueError(f"q_max must lie in [1, {MAX_SCAN}]")
    exact = spec.rational()
    if exact is not None:
        return _rational_scan(spec, exact, q_max, worst, tol)
    prec = tol.precision_bits + q_max.bit_length() + 16
    value = spec.value(prec)
    frac = value - mpmath.floor(value)
    fixed = np.uint64(int(mpmath.floor(frac * mpmath.mpf(2) ** 64)))
    slack = q_max * 2.0 ** -64 + 2.0 ** -52
    candidates: set[int] = set()
    running = math.inf
    smallest: list = []
    for lo in range(1, q_max + 1, _CHUNK):
        hi = min(q_max, lo + _CHUNK - 1)
        q = np.arange(lo, hi + 1, dtype=np.uint64)
        f = (q * fixed >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        dist = np.minimum(f, 1.0 - f)
        before = np.minimum.accumulate(np.concatenate(([running], dist[:-1])))
        hits = np.nonzero(dist <= before + 2 * slack)[0]
        candidates.update(int(lo + i) for i in hits)
        running = min(running, float(dist.min()))
        k = min(worst, len(dist))
        idx = np.argpartition(dist, k - 1)[:k]
        smallest += [(float(dist[i]), int(lo + i)) for i in idx]
        smallest = sorted(smallest)[:worst]
    cutoff = smallest[-1][0] + 2 * slack if smallest else math.inf
    for lo in range(1, q_max + 1, _CHUNK):
        hi = min(q_max, lo + _CHUNK - 1)
        q = np.arange(lo, hi + 1, dtype=np.uint64)
        f = (q * fixed >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        dist = np.minimum(f, 1.0 - f)
        candidates.update(int(lo + i) for i in np.nonzero(dist <= cutoff)[0])
    floor_eps = tol.eps * q_max
    exact_vals = {}
    with mpmath.workprec(prec):
        for q in sorted(candidates):
            v = nearest_integer_distance(q * value)
            if v < floor_eps:
                raise PrecisionError(
                    f"||{q} alpha|| = {mpmath.nstr(v, 5)} is below the precision floor; "
                    "raise precision_bits")
            exact_vals[q] = v
    records = _records(sorted(exact_vals.items()))
    worst_pairs = sorted(exact_vals.items(), key=lambda kv: (kv[1], kv[0]))[:worst]
    fit = _fit(records)
    report = DiophantineReport(spec.text, q_max, prec, [(q, float(v)) for q, v in worst_pairs],
                               [(q, float(v)) for q, v in records], False, fit)
    if continued_fraction:
        report.continued_fraction = continued_fraction_check(spec, q_max, tol)
    return report


def _rational_scan(spec: ScalarSpec, value: Fraction, q_max: int, worst: int,
                   tol: ToleranceProfile) -> DiophantineReport:
    num, den = value.numerator % value.denominator, value.denominator
    q = np.arange(1, q_max + 1, dtype=object if num * q_max >= 2**62 else np.int64)
    rem = (q * num) % den
    dist_num = np.minimum(rem, den - rem)
    order = sorted(range(q_max), key=lambda i: (int(dist_num[i]), i))[:worst]
    worst_pairs = [(i + 1, float(Fraction(int(dist_num[i]), den))) for i in order]
    records = _records([(i + 1, Fraction(int(dist_num[i]), den)) for i in range(q_max)])
    zero = any(v == 0 for _, v in records)
    return DiophantineReport(spec.text, q_max, tol.precision_bits, worst_pairs,
                             [(q, float(v)) for q, v in records], True,
                             None if zero else _fit(records))


def _records(pairs) -> list:
    out, best = [], None
    for q, v in pairs:
        if best is None or v < best:
            out.append((q, v))
            best = v
    return out


def _fit(records) -> tuple | None:
    pts = [(q, float(v)) for q, v in records if v > 0]
    if not pts:
        return None
    env = fit_power_envelope(pts)
    return env.coefficient, env.exponent


def continued_fraction_check(alpha: str | ScalarSpec, q_max: int,
                             tol: ToleranceProfile = DEFAULT_TOLERANCE) -> dict:
    """q ||q alpha|| along the continued-fraction convergent denominators up to q_max."""
    spec = alpha if isinstance(alpha, ScalarSpec) else ScalarSpec(str(alpha))
    prec = tol.precision_bits + q_max.bit_length() + 16
    out = []
    with mpmath.workprec(prec):
        value = spec.value(prec)
        x = value
        h_prev, h = 1, 0  # denominators q_{k-2}, q_{k-1}
        while True:
            a = int(mpmath.floor(x))
            h_prev, h = h, a * h + h_prev
            if h > q_max:
                break
            out.append((h, float(h * nearest_integer_distance(h * value))))
            frac = x - a
            if frac == 0:
                break
            x = 1 / frac
    return {"convergent_products": out,
            "min_product": min((p for _, p in out), default=None)}


@dataclass
class LinearFormReport:
    values: list
    bound: int
    minimum: float
    argmin: tuple
    restricted: bool = True

    def to_json(self) -> dict:
        return {"values": self.values, "bound": self.bound, "minimum": self.minimum,
                "argmin": list(self.argmin), "restricted_to_box": self.restricted}


def linear_form_scan(values: Sequence[str | ScalarSpec], bound: int,
                     tol: ToleranceProfile = DEFAULT_TOLERANCE) -> LinearFormReport:
    """min |q_1 b_1 + ... + q_k b_k| over non-zero integer vectors with |q_j| <= bound.

    Only this restricted box is scanned; the result says nothing outside it."""
    specs = [v if isinstance(v, ScalarSpec) else ScalarSpec(str(v)) for v in values]
    with mpmath.workprec(tol.precision_bits):
        betas = [s.value(tol.precision_bits) for s in specs]
        best, arg = None, None
        for q in itertools.product(range(-bound, bound + 1), repeat=len(betas)):
            if not any(q) or next(x for x in q if x) < 0:
                continue
            v = abs(mpmath.fsum(c * b for c, b in zip(q, betas)))
            if best is None or v < best:
                best, arg = v, q
    return LinearFormReport([s.text for s in specs], bound, float(best), arg)


# ---------------------------------------------------------------------------
# trace-gap scans


@dataclass
class GapScanReport:
    radius: int
    element_count: int
    per_length: list  # (n, m(n), witness word)
    exp_base: float | None
    power: tuple | None
    declared: str
    declared_ok: bool | None
    passed: bool
    failure_witness: tuple | None = None
    violations: list = field(default_factory=list)
    certification: CertificationReport | None = None

    def minimum(self, n: int) -> float | None:
        for k, v, _ in self.per_length:
            if k == n:
                return v
        return None

    def to_json(self, group: GroupPresentation | None = None) -> dict:
        fmt = group.format_word if group is not None else list
        return {
            "radius": self.radius,
            "elements": self.element_count,
            "per_length": [{"n": n, "min_gap": v, "witness": fmt(w)}
                           for n, v, w in self.per_length],
            "exp_base": self.exp_base,
            "power": None if self.power is None else {"coefficient": self.power[0],
                                                      "exponent": self.power[1]},
            "declared": self.declared,
            "declared_ok": self.declared_ok,
            "passed": self.passed,
            "failure_witness": None if self.failure_witness is None else fmt(
                self.failure_witness),
        }

    def to_csv(self, group: GroupPresentation | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "min_gap", "witness"])
        for n, v, wd in self.per_length:
            w.writerow([n, v, group.format_word(wd) if group is not None else list(wd)])
        return buf.getvalue()


def trace_gap_scan(f: Dfr, radius: int, tol: ToleranceProfile = DEFAULT_TOLERANCE,
                   strict: bool = True) -> GapScanReport:
    """Per-length minimum gaps over B(radius) with fitted lower envelopes.

    A zero gap at a non-identity element raises CertificationError unless
    strict is false, in which case the failed report is returned."""
    rep = certify_dfr(f, radius, tol)
    if strict and rep.failure_witness is not None:
        raise CertificationError(f"non-identity element with gap {rep.failure_gap}",
                                 rep.failure_witness)
    return GapScanReport(rep.radius, rep.element_count, rep.per_length, rep.exp_base,
                         rep.power, rep.declared, rep.declared_ok, rep.passed,
                         rep.failure_witness, rep.violations, rep)


def reverify_witnesses(f: Dfr, report: GapScanReport,
                       tol: ToleranceProfile = DEFAULT_TOLERANCE) -> bool:
    """Re-evaluate the gap at every witness word and compare with m(n)."""
    for _, v, w in report.per_length:
        _, gap = element_gap(f, w)
        if abs(float(gap) - v) > float(tol.eps) + 1e-15 * abs(v):
            return False
    return True


def calibrate_from_scan(report: GapScanReport, shape: str,
                        fixed_exponent: float | None = None) -> TauModel:
    if report.certification is None:
        raise ValueError("report carries no scan data")
    return calibrate_tau(report.certification, shape, fixed_exponent)


# ---------------------------------------------------------------------------
# runtime profiles


def identity_word(n: int) -> tuple:
    """a^(n/2) a^(-n/2) for even n."""
    if n % 2:
        raise ValueError("identity words built from one generator need even length")
    return (1,) * (n // 2) + (-1,) * (n // 2)


@dataclass
class RuntimeProfile:
    claim: str
    lengths: list
    expected_steps: list
    slope: float
    intercept: float
    r_squared: float
    method: str
    noisy: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "expected_steps"])
        for n, s in zip(self.lengths, self.expected_steps):
            w.writerow([n, s])
        return buf.getvalue()


def runtime_profile(machine: QcfaMachine, lengths: Sequence[int],
                    words: Callable[[int], Iterable] | None = None, claim: str = "poly",
                    trials: int = 2000, seed: int = 0,
                    step_limit: int = DEFAULT_STEP_LIMIT) -> RuntimeProfile:
    """Expected steps per length (mean over the supplied words) with a log-log
    fit for polynomial claims or a log-linear fit for exponential ones.  Falls
    back to Monte Carlo means when the analytic engine is unavailable."""
    if claim not in ("poly", "exp"):
        raise ValueError("claim must be 'poly' or 'exp'")
    words = words or (lambda n: [identity_word(n)])
    steps, method = [], "analytic"
    for n in lengths:
        vals = []
        for w in words(n):
            try:
                if method != "analytic":
                    raise AnalysisUnavailable("fallback already active")
                a = analyze_acceptance(machine, w)
                if a.expected_steps is None:
                    raise AnalysisUnavailable("machine never halts on this word")
                vals.append(float(a.expected_steps))
            except AnalysisUnavailable:
                method = "montecarlo"
                vals.append(run_montecarlo(machine, w, trials, seed, step_limit).mean_steps)
        steps.append(sum(vals) / len(vals))
    if claim == "poly":
        slope, intercept, r2 = loglog_slope(lengths, steps)
    else:
        slope, intercept, r2 = linear_fit(lengths, [math.log(s) for s in steps])
    return RuntimeProfile(claim, list(lengths), steps, slope, intercept, r2, method,
                          method != "analytic")


# ---------------------------------------------------------------------------
# Monte Carlo against the closed forms


@dataclass
class Reconciliation:
    word: tuple
    trials: int
    seed: int
    analytic_accept: float
    mc_accept: float
    z_accept: float
    analytic_steps: float
    mc_steps: float
    z_steps: float
    step_limited: int
    passed: bool

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def z_score(observed: float, expected: float, sigma: float) -> float:
    """(observed - expected) / sigma, with exact comparison when sigma is zero."""
    if sigma == 0:
        return 0.0 if observed == expected else math.inf
    return (observed - expected) / sigma


def mc_vs_analytic(machine: QcfaMachine, word: Sequence[int], trials: int, seed: int,
                   step_limit: int = DEFAULT_STEP_LIMIT, bound: float = 3.0) -> Reconciliation:
    a = analyze_acceptance(machine, word)
    if a.overall_accept is None:
        raise AnalysisUnavailable("the machine does not halt on this word")
    stats = run_montecarlo(machine, word, trials, seed, step_limit)
    p = probability_float(a.overall_accept)
    done = stats.accepts + stats.rejects
    z_acc = z_score(stats.accept_freq, p, math.sqrt(p * (1 - p) / done) if done else 0.0)
    mean = float(a.expected_steps)
    z_st = z_score(stats.mean_steps, mean, stats.steps_std / math.sqrt(done) if done else 0.0)
    passed = stats.step_limited == 0 and abs(z_acc) <= bound and abs(z_st) <= bound
    return Reconciliation(tuple(word), trials, seed, p, stats.accept_freq, z_acc, mean,
                          stats.mean_steps, z_st, stats.step_limited, passed)
