"""Closed-form acceptance analysis of round-structured machines.

One loop iteration is a chain of measurement rounds followed by a coin
gadget with known success probability, cost and restart positions; the
geometric series over iterations is summed in closed form.  Two independent
routes are provided for cross-checking: exact stepping of a single iteration
through the transition table, and an absorbing Markov chain over
measurement-point configurations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .exact import Exact
from .groups import CosetTable, GroupPresentation, coset_rewrite
from .linalg import EXACT, Matrix, StateVector, apply
from .machine import MachineConfig, MachineError, QcfaMachine, UnitaryAction, tape_symbols
from .reps import UnitaryRep, eval_rep


class AnalysisUnavailable(MachineError):
    pass


# ---------------------------------------------------------------------------
# probability scalars: Fraction / Exact on the exact backend, mpf otherwise


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, Exact):
        return x.to_mpc().real
    if isinstance(x, mpmath.mpc):
        return x.real
    return mpmath.mpf(x)


def _lift(x, like):
    """Bring a Fraction into the arithmetic of ``like``."""
    if isinstance(x, Fraction):
        if isinstance(like, Exact):
            return Exact.from_rational(x)
        if isinstance(like, (mpmath.mpf, mpmath.mpc)):
            return mpmath.mpf(x.numerator) / x.denominator
    return x


def _mul(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    if isinstance(a, Fraction):
        a = _lift(a, b)
    if isinstance(b, Fraction):
        b = _lift(b, a)
    return a * b


def _one_minus(a):
    if isinstance(a, Fraction):
        return 1 - a
    if isinstance(a, Exact):
        return Exact.from_rational(1) - a
    return 1 - a


def _clamp_unit(a):
    # floating rounding can push a probability just outside [0, 1]
    if isinstance(a, mpmath.mpf):
        return min(max(a, mpmath.mpf(0)), mpmath.mpf(1))
    return a


def _add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    if isinstance(a, Fraction):
        a = _lift(a, b)
    if isinstance(b, Fraction):
        b = _lift(b, a)
    return a + b


def _is_zero(a) -> bool:
    if isinstance(a, Exact):
        return a.is_zero()
    return a == 0


def _simplify(a):
    """Fraction when the value is rational, else the field element or mpf."""
    if isinstance(a, Exact) and a.is_rational():
        return a.rational_value()
    return a


def _div(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a / b
    if isinstance(a, Fraction):
        a = _lift(a, b)
    if isinstance(b, Fraction):
        b = _lift(b, a)
    return a / b


def to_mpf(x):
    """A probability as a BigFloat at the working precision."""
    return _to_mpf(x)


def probability_float(x) -> float:
    return float(_to_mpf(x))


# ---------------------------------------------------------------------------
# coin closed forms


def _flip_cost(y: int) -> Fraction:
    return sum((Fraction(2, 2 ** (u - 1)) for u in range(1, y + 1)), Fraction(0)) + \
        (1 - Fraction(1, 2 ** y))


@dataclass(frozen=True)
class CoinProfile:
    success: Fraction
    expected_steps: Fraction
    restarts: dict  # head position -> probability of a failed exit there


def coin_profile(coin: dict, n: int) -> CoinProfile:
    """Success probability, expected steps from entry to exit, and the head
    positions of failed exits for a coin gadget on a word of length n."""
    return _coin_profile(coin["type"], int(coin.get("m", 0)), int(coin.get("y", 0)),
                         str(coin.get("p", "")), n)


@lru_cache(maxsize=4096)
def _coin_profile(kind: str, m: int, y: int, p: str, n: int) -> CoinProfile:
    half_y = Fraction(1, 2 ** y)
    if kind == "R":
        s = Fraction(1, n + 1)
        walk = Fraction(5 * n, 2) + 1
        cost = sum((s ** (i - 1) * walk for i in range(1, m + 1)), Fraction(0))
        cost += sum((s ** i * (n + 1) for i in range(1, m)), Fraction(0))
        cost += s ** m * _flip_cost(y)
        restarts = {0: 1 - s ** m}
        if y:
            restarts[n + 1] = s ** m * (1 - half_y)
        return CoinProfile(s ** m * half_y, cost, restarts)
    if kind == "Rprime":
        p = Fraction(p)
        cost = sum((p ** (i - 1) * 2 for i in range(1, n + 1)), Fraction(0))
        cost += (1 - p ** n) + p ** n * (1 + _flip_cost(y))
        restarts = {i: p ** (i - 1) * (1 - p) for i in range(1, n + 1)}
        if y:
            restarts[n + 1] = p ** n * (1 - half_y)
        return CoinProfile(p ** n * half_y, cost, {h: q for h, q in restarts.items() if q})
    if kind == "B":
        p = Fraction(p)
        return CoinProfile(p, 2 + (1 - p), {0: 1 - p} if p < 1 else {})
    raise AnalysisUnavailable(f"unknown coin type {kind!r}")


def sub_r_probability(n: int, m: int, y: int) -> Fraction:
    return Fraction(1, (n + 1) ** m * 2 ** y)


def sub_rprime_probability(p, n: int, y: int) -> Fraction:
    return Fraction(p) ** n / 2 ** y


# ---------------------------------------------------------------------------
# result type


@dataclass
class RoundAnalysis:
    word_length: int
    p_acc: object
    p_rej: object
    overall_accept: object | None
    overall_reject: object | None
    expected_iterations: object | None
    expected_steps: object | None
    round_success: list = field(default_factory=list)
    coin: dict | None = None
    final_coset: int | None = None

    @property
    def p_halt(self):
        return _add(self.p_acc, self.p_rej)

    def to_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            if isinstance(x, Fraction):
                return {"fraction": str(x), "value": float(x)}
            return {"value": float(_to_mpf(x))}
        return {
            "word_length": self.word_length,
            "p_acc": num(self.p_acc),
            "p_rej": num(self.p_rej),
            "p_halt": num(self.p_halt),
            "overall_accept": num(self.overall_accept),
            "overall_reject": num(self.overall_reject),
            "expected_iterations": num(self.expected_iterations),
            "expected_steps": num(self.expected_steps),
            "round_success": [num(p) for p in self.round_success],
            "coin": self.coin,
            "final_coset": self.final_coset,
        }


def _finish(n, p_acc, p_rej, round_success, coin, travel_sum, a, first_travel, coset=None,
            with_steps=True):
    """Geometric-series totals.  ``a`` is the expected per-iteration cost without
    the initial traversal; ``travel_sum`` = sum_h q(h) (n+1-h) over restarts;
    ``first_travel`` the traversal of the first iteration."""
    p_acc, p_rej = _simplify(p_acc), _simplify(p_rej)
    halt = _add(p_acc, p_rej)
    if _is_zero(halt):
        return RoundAnalysis(n, p_acc, p_rej, None, None, None, None, round_success, coin, coset)
    if _is_zero(p_rej):
        acc = Fraction(1)
    elif _is_zero(p_acc):
        acc = Fraction(0)
    else:
        acc = _simplify(_div(p_acc, halt))
    acc = _clamp_unit(acc)
    rej = _clamp_unit(_simplify(_one_minus(acc)) if not isinstance(acc, Fraction) else 1 - acc)
    if not with_steps:
        return RoundAnalysis(n, p_acc, p_rej, acc, rej, None, None, round_success, coin, coset)
    halt_f = _to_mpf(halt)
    x = (_to_mpf(a) + _to_mpf(travel_sum)) / halt_f
    steps = _to_mpf(first_travel) + x
    return RoundAnalysis(n, p_acc, p_rej, acc, rej, 1 / halt_f, steps, round_success, coin, coset)


# ---------------------------------------------------------------------------
# closed-form engine


class _RoundCache:
    """Per-machine representations and probe coefficients."""

    def __init__(self, machine: QcfaMachine):
        s = machine.structure
        self.base = GroupPresentation.from_json(s["base_group"])
        self.table = None
        if s.get("coset_table") is not None:
            self.table = CosetTable.from_json(s["coset_table"], self.base)
        reps: dict = {}
        self.rounds = []
        for r in s["rounds"]:
            images = {int(c): i for c, i in r["images"].items()}
            key = tuple(images[g] for g in range(1, self.base.generator_count + 1))
            rep = reps.get(key)
            if rep is None:
                rep = UnitaryRep(self.base, [machine.unitaries[i] for i in key], check=False,
                                 dim=machine.d, backend=machine.backend)
                reps[key] = rep
            prep = machine.unitaries[r["prep"]]
            final = machine.unitaries[r["final"]]
            if rep.backend != EXACT:
                prep, final = prep.to_bigfloat(), final.to_bigfloat()
            col = [prep.rows[v][0] for v in range(machine.d)]
            row = final.rows[0]
            coeffs = [(u, v, row[u] * col[v]) for u in range(machine.d) for v in range(machine.d)
                      if not _is_zero(row[u]) and not _is_zero(col[v])]
            self.rounds.append((rep, coeffs))

    def success(self, index: int, word) -> object:
        rep, coeffs = self.rounds[index]
        mat = eval_rep(rep, word)
        amp = None
        for u, v, c in coeffs:
            term = c * mat.rows[u][v]
            amp = term if amp is None else amp + term
        if amp is None:
            return Fraction(0)
        if isinstance(amp, Exact):
            return amp.abs2()
        return amp.real * amp.real + amp.imag * amp.imag


def _round_cache(machine: QcfaMachine) -> _RoundCache:
    c = machine._cache.get("rounds")
    if c is None:
        c = _RoundCache(machine)
        machine._cache["rounds"] = c
    return c


def analyze_acceptance(machine: QcfaMachine, word: Sequence[int],
                       with_steps: bool = True) -> RoundAnalysis:
    """Closed-form acceptance probabilities and expected running time.  With
    ``with_steps`` false the running-time fields are left as None."""
    word = machine.group.check_word(word)
    kind = machine.structure.get("kind")
    n = len(word)
    if kind == "trivial":
        acc = Fraction(1 if machine.structure["accept"] else 0)
        return RoundAnalysis(n, acc, 1 - acc, acc, 1 - acc, Fraction(1), Fraction(1))
    if kind == "coin":
        return _analyze_coin(machine, n)
    if kind == "oneway":
        return _analyze_oneway(machine, word)
    if kind not in ("poly", "exp", "unbounded"):
        raise AnalysisUnavailable("machine carries no round structure")
    cache = _round_cache(machine)
    coset = None
    if cache.table is not None:
        coset, fed, lengths = coset_rewrite(cache.table, word)
        sweep = sum(max(x, 1) for x in lengths)
    else:
        fed, sweep = word, n
    if coset not in (None, 1):
        # the first pass ends outside the subgroup: rejected at the left marker
        return _finish(n, Fraction(0), Fraction(1), [], None, 0, sweep + 2, n + 1, coset,
                       with_steps)
    round_cost = n + sweep + 3
    reach = Fraction(1)
    cost = Fraction(0)
    successes = []
    for i in range(len(cache.rounds)):
        if with_steps:
            cost = _add(cost, _mul(reach, Fraction(sweep + 3 if i == 0 else round_cost)))
        p = cache.success(i, fed)
        successes.append(_simplify(p))
        reach = _mul(reach, p)
    p_pass = reach
    p_rej = _one_minus(p_pass)
    coin = machine.structure.get("coin")
    if coin is None:
        return _finish(n, p_pass, p_rej, successes, None, 0, cost, n + 1, coset, with_steps)
    prof = coin_profile(coin, n)
    p_acc = _mul(p_pass, prof.success)
    travel = 0
    if with_steps:
        cost = _add(cost, _mul(p_pass, prof.expected_steps))
        travel = _mul(p_pass, sum((q * (n + 1 - h) for h, q in prof.restarts.items()),
                                  Fraction(0)))
    return _finish(n, p_acc, p_rej, successes, coin, travel, cost, n + 1, coset, with_steps)


def _analyze_coin(machine: QcfaMachine, n: int) -> RoundAnalysis:
    coin = machine.structure["coin"]
    prof = coin_profile(coin, n)
    steps = Fraction(machine.structure.get("entry_steps", 0)) + prof.expected_steps
    acc = prof.success
    return RoundAnalysis(n, acc, 1 - acc, acc, 1 - acc, Fraction(1), steps, [], coin)


def _analyze_oneway(machine: QcfaMachine, word) -> RoundAnalysis:
    s = machine.structure
    psi = StateVector.basis(machine.d, 0, machine.backend)
    psi = apply(machine.unitaries[s["prep"]], psi)
    for c in word:
        psi = apply(machine.unitaries[s["letters"][str(c)]], psi)
    psi = apply(machine.unitaries[s["final"]], psi)
    meas = machine.delta[("meas", "#R")]
    block = meas.partition.blocks[s["accept_block"]]
    acc = None
    for i in block:
        x = psi.amps[i]
        t = x.abs2() if isinstance(x, Exact) else x.real * x.real + x.imag * x.imag
        acc = t if acc is None else acc + t
    acc = _simplify(acc)
    rej = _simplify(_one_minus(acc))
    return RoundAnalysis(len(word), acc, rej, acc, rej, Fraction(1), Fraction(len(word) + 3))


# ---------------------------------------------------------------------------
# route 2: exact stepping of one iteration


@dataclass
class IterationTrace:
    p_reject: object
    p_coin: object
    p_accept: object
    expected_steps: object  # mass-weighted steps until reject / coin entry / accept
    round_success: list


def trace_iteration(machine: QcfaMachine, word: Sequence[int], head: int = 0,
                    max_steps: int = 10**6) -> IterationTrace:
    """Execute one loop iteration through the transition table with exact
    (unnormalized) registers, from the loop start at the given head position."""
    s = machine.structure
    if s.get("kind") not in ("poly", "exp", "unbounded"):
        raise AnalysisUnavailable("only loop machines have iterations")
    coin = s.get("coin")
    stop = {machine.accept, machine.reject}
    entry = coin["entry"] if coin else None
    tape = tape_symbols(machine.group.check_word(word))
    frontier = [(MachineConfig(s["loop_start"], head, StateVector.basis(machine.d, 0,
                                                                          machine.backend)), 0)]
    p_rej = p_coin = p_acc = 0
    steps_total = 0
    successes = []
    taken = 0
    while frontier:
        cfg, steps = frontier.pop()
        while True:
            if cfg.state in stop or cfg.state == entry:
                mass = cfg.psi.norm2()
                steps_total = steps_total + _to_mpf(mass) * steps
                if cfg.state == machine.reject:
                    p_rej = p_rej + mass
                elif cfg.state == machine.accept:
                    p_acc = p_acc + mass
                else:
                    p_coin = p_coin + mass
                break
            act = machine.delta[(cfg.state, tape[cfg.head])]
            branches = machine.step_branches(cfg, tape)
            steps += 1
            taken += 1
            if taken > max_steps:
                raise AnalysisUnavailable("iteration exceeded the step budget")
            if isinstance(act, UnitaryAction):
                cfg = branches[0][1]
                continue
            live = [(p, c) for p, c in branches if not _is_zero(p)]
            total = None
            for p, _ in live:
                total = p if total is None else total + p
            ok = [p for p, c in live if c.state != machine.reject]
            if total is not None and ok:
                successes.append(_simplify(_div(ok[0], total)))
            for p, c in live[1:]:
                frontier.append((c, steps))
            if not live:
                break
            cfg = live[0][1]
    return IterationTrace(_simplify(p_rej), _simplify(p_coin), _simplify(p_acc), steps_total,
                          successes)


# ---------------------------------------------------------------------------
# route 3: absorbing chain over measurement points


@dataclass
class ChainAnalysis:
    accept: float
    reject: float
    expected_steps: float
    nodes: int


def markov_chain_analysis(machine: QcfaMachine, word: Sequence[int],
                          max_nodes: int = 20000) -> ChainAnalysis:
    """Float analysis of the whole machine as a Markov chain whose nodes are
    (state, head, basis index) right after each measurement.  Needs every
    non-halting post-measurement register to be a basis state up to phase."""
    tape = tape_symbols(machine.group.check_word(word))
    halt = {machine.accept: 0, machine.reject: 1}
    index: dict = {}
    order: list = []
    edges: list = []  # per node: list of (prob, target or halting tag, steps)

    def node(state, head, k):
        key = (state, head, k)
        if key not in index:
            if len(order) >= max_nodes:
                raise AnalysisUnavailable("chain too large")
            index[key] = len(order)
            order.append(key)
        return index[key]

    node(machine.start, 0, 0)
    i = 0
    while i < len(order):
        state, head, k = order[i]
        cfg = MachineConfig(state, head, StateVector.basis(machine.d, k, machine.backend))
        steps = 0
        out = []
        while True:
            act = machine.delta[(cfg.state, tape[cfg.head])]
            branches = machine.step_branches(cfg, tape)
            steps += 1
            if isinstance(act, UnitaryAction):
                cfg = branches[0][1]
                if cfg.state in halt:
                    out.append((1.0, ("halt", halt[cfg.state]), steps))
                    break
                if steps > 10**6:
                    raise AnalysisUnavailable("deterministic segment does not reach a measurement")
                continue
            for p, c in branches:
                pf = float(_to_mpf(p))
                if pf == 0.0:
                    continue
                if c.state in halt:
                    out.append((pf, ("halt", halt[c.state]), steps))
                    continue
                nz = [j for j, x in enumerate(c.psi.amps) if not _is_zero(x)]
                if len(nz) != 1:
                    raise AnalysisUnavailable("post-measurement register is not a basis state")
                out.append((pf, node(c.state, c.head, nz[0]), steps))
            break
        edges.append(out)
        i += 1
    size = len(order)
    a = np.eye(size)
    acc_rhs = np.zeros(size)
    rej_rhs = np.zeros(size)
    step_rhs = np.zeros(size)
    for src, out in enumerate(edges):
        norm = sum(p for p, _, _ in out)
        for p, tgt, steps in out:
            p = p / norm
            step_rhs[src] += p * steps
            if isinstance(tgt, tuple):
                (acc_rhs if tgt[1] == 0 else rej_rhs)[src] += p
            else:
                a[src, tgt] -= p
    acc = np.linalg.solve(a, acc_rhs)
    rej = np.linalg.solve(a, rej_rhs)
    steps = np.linalg.solve(a, step_rhs)
    return ChainAnalysis(float(acc[0]), float(rej[0]), float(steps[0]), size)


def round_success_probability(rep: UnitaryRep, prep: Matrix, final: Matrix, word) -> object:
    """|<q1| final rho(w) prep |q1>|^2."""
    mat = eval_rep(rep, word)
    psi = StateVector([prep.rows[v][0] for v in range(prep.dim)], prep.backend, prep.prec)
    out = apply(final, apply(mat, psi))
    x = out.amps[0]
    return _simplify(x.abs2()) if isinstance(x, Exact) else x.real * x.real + x.imag * x.imag
