"""Machine assemblers: measurement rounds, coin gadgets and the loop machines."""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

from .dfr import Dfr, DfrError, TauModel, dfr_combine, machine_ready
from .exact import Exact
from .groups import (CosetTable, GroupPresentation, free_abelian_group, validate_coset_table,
                     virtual_overgroup)
from .linalg import (BIGFLOAT, EXACT, Matrix, MeasurementPartition, StateVector, block_diagonal,
                     dft_matrix, kron, permutation_matrix, transition_unitary, uniform_state)
from .machine import LEFT, RIGHT, MachineBuilder, MachineError, MeasureAction, QcfaMachine

LOOP_KINDS = ("poly", "exp", "unbounded")


# ---------------------------------------------------------------------------
# small unitaries


def _basis(d: int, k: int, backend: str) -> StateVector:
    return StateVector.basis(d, k, backend)


def coin_unitary(d: int, backend: str = EXACT) -> Matrix:
    """Hadamard on span{q1, q2}, identity elsewhere."""
    if backend == EXACT:
        h = Exact.sqrt(Fraction(1, 2))
        z, o = Exact.from_rational(0), Exact.from_rational(1)
    else:
        h = 1 / mpmath.sqrt(2)
        z, o = mpmath.mpc(0), mpmath.mpc(1)
    rows = [[o if i == j else z for j in range(d)] for i in range(d)]
    rows[0][0], rows[0][1], rows[1][0], rows[1][1] = h, h, h, -h
    return Matrix(rows, backend)


def reset_unitary(d: int, backend: str = EXACT) -> Matrix:
    """Maps q2 back to q1."""
    return transition_unitary(_basis(d, 1, backend), _basis(d, 0, backend))


def biased_state(d: int, p, backend: str = EXACT) -> StateVector:
    """sqrt(p) q1 + sqrt(1-p) q2."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if backend == EXACT:
        amps = [Exact.sqrt(p), Exact.sqrt(1 - p)] + [Exact.from_rational(0)] * (d - 2)
        return StateVector(amps, EXACT)
    amps = [mpmath.sqrt(mpmath.mpf(p.numerator) / p.denominator),
            mpmath.sqrt(mpmath.mpf((1 - p).numerator) / (1 - p).denominator)] + [0] * (d - 2)
    return StateVector(amps, BIGFLOAT)


def _as_backend(m: Matrix, backend: str) -> Matrix:
    return m.to_bigfloat() if backend == BIGFLOAT else m


# ---------------------------------------------------------------------------
# coin gadgets


def _flips(b: MachineBuilder, prefix: str, y: int, on_fail: str, on_success: str) -> str:
    """y fair coins at the right end marker; any tails goes to on_fail with the
    register reset to q1."""
    if y == 0:
        return on_success
    h = b.unitary(coin_unitary(b.d, b.backend))
    fix = b.unitary(reset_unitary(b.d, b.backend))
    fix_state = b.state(f"{prefix}.flipfix")
    b.go(fix_state, RIGHT, fix, on_fail, 0)
    names = [f"{prefix}.flip{u}" for u in range(1, y + 1)]
    for u, name in enumerate(names, start=1):
        prep = b.state(name)
        meas = b.state(name + "m")
        nxt = names[u] if u < y else on_success
        b.go(prep, RIGHT, h, meas, 0)
        b.on(meas, RIGHT, MeasureAction(MeasurementPartition.standard(b.d),
                                        ((fix_state, 0), (nxt, 0))))
    return names[0]


def sub_r_fragment(b: MachineBuilder, prefix: str, m: int, y: int, on_walk_fail: str,
                   on_flip_fail: str, on_success: str) -> str:
    """m unbiased walks from the cell right of the left marker, each succeeding
    when the right marker is reached first, then y fair coins.  Entered at
    head position 1; returns the entry state."""
    if m < 1 or y < 0:
        raise ValueError("sub_R needs m >= 1 and y >= 0")
    h = b.unitary(coin_unitary(b.d, b.backend))
    fix = b.unitary(reset_unitary(b.d, b.backend))
    letters = b.letters()
    walk = [f"{prefix}.walk{i}" for i in range(1, m + 1)]
    flips_entry = _flips(b, prefix, y, on_flip_fail, on_success)
    for i, name in enumerate(walk, start=1):
        a = b.state(name)
        meas = b.state(name + "m")
        fixs = b.state(name + "fix")
        b.go(a, letters, h, meas, 0)
        b.on(meas, letters, MeasureAction(MeasurementPartition.standard(b.d),
                                          ((fixs, 0), (a, 1))))
        b.go(fixs, letters, fix, a, -1)
        b.go(a, LEFT, None, on_walk_fail, 0)
        if i < m:
            back = b.state(f"{name}back")
            b.go(a, RIGHT, None, back, -1)
            b.go(back, letters, None, back, -1)
            b.go(back, LEFT, None, walk[i], 1)
        else:
            b.go(a, RIGHT, None, flips_entry, 0)
    return walk[0]


def sub_rprime_fragment(b: MachineBuilder, prefix: str, p, y: int, on_fail: str,
                        on_flip_fail: str, on_success: str) -> str:
    """Left-to-right scan running a p-biased coin on every input symbol, then
    y fair coins.  Entered at head position 1."""
    p = Fraction(p)
    if not 0 <= p <= 1 or y < 0:
        raise ValueError("sub_R' needs p in [0, 1] and y >= 0")
    prep = b.unitary(transition_unitary(_basis(b.d, 0, b.backend), biased_state(b.d, p, b.backend)))
    fix = b.unitary(reset_unitary(b.d, b.backend))
    letters = b.letters()
    a = b.state(f"{prefix}.scan")
    meas = b.state(f"{prefix}.scanm")
    fixs = b.state(f"{prefix}.scanfix")
    flips_entry = _flips(b, prefix, y, on_flip_fail, on_success)
    b.go(a, letters, prep, meas, 0)
    b.on(meas, letters, MeasureAction(MeasurementPartition.standard(b.d), ((fixs, 0), (a, 1))))
    b.go(fixs, letters, fix, on_fail, 0)
    b.go(a, RIGHT, None, flips_entry, 0)
    return a


# ---------------------------------------------------------------------------
# measurement rounds


class _SweepPlan:
    """How input symbols feed the simulated register during a right-to-left pass."""

    def __init__(self, table: CosetTable | None):
        self.table = table
        self.cosets = table.index if table is not None else 1

    def step(self, c: int, t: int) -> tuple[int, tuple]:
        if self.table is None:
            return 1, (c,)
        return self.table.alpha[(c, t)], tuple(self.table.beta_hat[(c, t)])


def _emit_round(b: MachineBuilder, prefix: str, prep: Matrix, final: Matrix,
                images: dict, plan: _SweepPlan, on_success: str) -> dict:
    """PREP moves right to the right marker and prepares the probe state; the
    sweep applies the images right to left; at the left marker the final
    unitary and a {B0, {q1}} measurement follow.  Returns round metadata."""
    letters = b.letters()
    prep_state = b.state(f"{prefix}.prep")
    meas = b.state(f"{prefix}.meas")
    idx = {c: b.unitary(m) for c, m in images.items()}
    prep_idx = b.unitary(prep)
    final_idx = b.unitary(final)
    sweep = {t: (f"{prefix}.sweep" if plan.cosets == 1 else f"{prefix}.sweep{t}")
             for t in range(1, plan.cosets + 1)}
    for s in sweep.values():
        b.state(s)
    b.go(prep_state, (LEFT, *letters), None, prep_state, 1)
    b.go(prep_state, RIGHT, prep_idx, sweep[1], -1)
    for t, s in sweep.items():
        for c in letters:
            t_next, word = plan.step(c, t)
            if not word:
                b.go(s, c, None, sweep[t_next], -1)
                continue
            # letters of the fed word are applied last-first without moving
            chain = list(reversed(word))
            cur = s
            for i, hc in enumerate(chain):
                last = i == len(chain) - 1
                if last:
                    b.go(cur, c, idx[hc], sweep[t_next], -1)
                else:
                    nxt = b.state(f"{prefix}.feed{t}.{b.group.format_word((c,))}.{i + 1}")
                    b.go(cur, c, idx[hc], nxt, 0)
                    cur = nxt
        if t == 1:
            b.go(s, LEFT, final_idx, meas, 0)
        else:
            b.go(s, LEFT, None, b.reject, 0)
    b.on(meas, LEFT, MeasureAction(MeasurementPartition.standard(b.d),
                                   ((b.reject, 0), (on_success, 1))))
    return {"prep_state": prep_state, "prep": prep_idx, "final": final_idx,
            "images": {str(c): i for c, i in idx.items()}}


def _rep_images(rep, backend: str) -> dict:
    out = {}
    for c in rep.group.alphabet:
        out[c] = _as_backend(rep.symbol_image(c), backend)
    return out


def _dft_rounds(f: Dfr, backend: str) -> list:
    d = f.d
    prep = _as_backend(transition_unitary(_basis(d, 0, backend), uniform_state(d, backend)), backend)
    final = dft_matrix(d, backend)
    return [(f"j{j + 1}", prep, final, _rep_images(rep, backend), {"rep": j, "probe": "dft"})
            for j, rep in enumerate(f.reps)]


def _multipass_rounds(f: Dfr, backend: str) -> list:
    d = f.d
    out = []
    uni = _as_backend(transition_unitary(_basis(d, 0, backend), uniform_state(d, backend)), backend)
    for j, rep in enumerate(f.reps):
        images = _rep_images(rep, backend)
        out.append((f"j{j + 1}v0", uni, dft_matrix(d, backend), images,
                    {"rep": j, "probe": "dft"}))
        for v in range(1, d + 1):
            prep = transition_unitary(_basis(d, 0, backend), _basis(d, v - 1, backend))
            out.append((f"j{j + 1}v{v}", prep, permutation_matrix(d, v, backend), images,
                        {"rep": j, "probe": f"diag{v}"}))
    return out


def _machine_backend(f: Dfr) -> str:
    if f.backend == BIGFLOAT or 24 % f.d:
        return BIGFLOAT
    return EXACT


def _build_loop(group: GroupPresentation, base_group: GroupPresentation, d: int, backend: str,
                rounds: list, coin: dict | None, table: CosetTable | None, kind: str,
                params: dict, label: str) -> QcfaMachine:
    b = MachineBuilder(group, d, backend)
    plan = _SweepPlan(table)
    loop_start = f"{rounds[0][0]}.prep"
    if coin is None:
        after = b.accept
    elif coin["type"] == "R":
        after = sub_r_fragment(b, "coin", coin["m"], coin["y"], loop_start, loop_start, b.accept)
    else:
        after = sub_rprime_fragment(b, "coin", Fraction(coin["p"]), coin["y"], loop_start,
                                    loop_start, b.accept)
    if coin is not None:
        coin = dict(coin, entry=after)
    meta = []
    for i, (tag, prep, final, images, info) in enumerate(rounds):
        nxt = f"{rounds[i + 1][0]}.prep" if i + 1 < len(rounds) else after
        m = _emit_round(b, tag, prep, final, images, plan, nxt)
        m.update(info)
        m["label"] = tag
        meta.append(m)
    structure = {
        "kind": kind,
        "loop_start": loop_start,
        "rounds": meta,
        "base_group": base_group.to_json(),
        "coset_table": None if table is None else table.to_json(),
        "coin": coin,
        "params": params,
    }
    return b.build(loop_start, structure, label)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return eps


def _coin_count(ratio: float) -> int:
    """Smallest y >= 0 with 2**-y <= 1/ratio."""
    y = max(0, math.ceil(math.log2(ratio))) if ratio > 1 else 0
    while 2.0 ** (-y) > 1.0 / ratio:
        y += 1
    while y > 0 and 2.0 ** (-(y - 1)) <= 1.0 / ratio:
        y -= 1
    return y


def poly_coin_parameters(tau: TauModel, d: int, eps: float, beta_max: int = 1) -> dict:
    c1, c2 = tau.poly_constants()
    c1_eff = c1 * float(beta_max) ** (-c2)
    m = max(1, math.ceil(c2 - 1e-12))
    y = _coin_count(d / (eps * c1_eff))
    return {"type": "R", "m": m, "y": y, "C1": c1, "C2": c2, "C1_effective": c1_eff}


def exp_coin_parameters(tau: TauModel, d: int, eps: float, beta_max: int = 1,
                        reading: str = "square") -> dict:
    base = tau.exp_base() ** beta_max
    if reading == "square":
        p = Fraction(1, math.ceil(base * base))
    elif reading == "base":
        p = Fraction(1, math.ceil(base))
    else:
        raise ValueError("reading must be 'square' or 'base'")
    y = _coin_count(4 * d ** 4 / eps)
    return {"type": "Rprime", "p": str(p), "y": y, "base": base, "reading": reading}


def _require_ready(f: Dfr):
    if not machine_ready(f):
        raise DfrError("the DFR must be certified with calibrated constants")


def assemble_poly_machine(f: Dfr, eps: float, table: CosetTable | None = None) -> QcfaMachine:
    eps = _check_eps(eps)
    _require_ready(f)
    if not f.diagonal:
        raise DfrError("the polynomial-time machine needs a diagonal DFR")
    if f.tau.effective_shape not in ("PolyLower", "Constant"):
        raise DfrError("the polynomial-time machine needs a polynomial tau")
    beta_max = 1 if table is None else max(1, table.max_beta_length)
    coin = poly_coin_parameters(f.tau, f.d, eps, beta_max)
    backend = _machine_backend(f)
    group, label = _target(f, table, f"poly[{f.label}]")
    params = {"eps": eps, "tau": f.tau.to_json(), "d": f.d, "k": f.k, "beta_max": beta_max}
    return _build_loop(group, f.group, f.d, backend, _dft_rounds(f, backend), coin, table,
                       "poly", params, label)


def assemble_exp_machine(f: Dfr, eps: float, table: CosetTable | None = None,
                         reading: str = "square") -> QcfaMachine:
    eps = _check_eps(eps)
    _require_ready(f)
    if f.tau.effective_shape != "ExpLower":
        raise DfrError("the exponential-time machine needs an exponential tau")
    beta_max = 1 if table is None else max(1, table.max_beta_length)
    coin = exp_coin_parameters(f.tau, f.d, eps, beta_max, reading)
    backend = _machine_backend(f)
    group, label = _target(f, table, f"exp[{f.label}]")
    params = {"eps": eps, "tau": f.tau.to_json(), "d": f.d, "k": f.k, "beta_max": beta_max}
    return _build_loop(group, f.group, f.d, backend, _multipass_rounds(f, backend), coin, table,
                       "exp", params, label)


def assemble_unbounded_machine(f: Dfr, table: CosetTable | None = None) -> QcfaMachine:
    if not f.certified:
        raise DfrError("the DFR must be certified")
    backend = _machine_backend(f)
    group, label = _target(f, table, f"unbounded[{f.label}]")
    params = {"tau": f.tau.to_json(), "d": f.d, "k": f.k}
    return _build_loop(group, f.group, f.d, backend, _multipass_rounds(f, backend), None, table,
                       "unbounded", params, label)


def _target(f: Dfr, table: CosetTable | None, label: str):
    if table is None:
        return f.group, label
    if table.base != f.group:
        raise MachineError("coset table base does not match the DFR's group")
    validate_coset_table(table)
    return virtual_overgroup(table.base, table), f"overgroup[{table.name}]{label}"


def _rounds_from_structure(machine: QcfaMachine) -> tuple:
    out = []
    base = GroupPresentation.from_json(machine.structure["base_group"])
    for r in machine.structure["rounds"]:
        images = {int(c): machine.unitaries[i] for c, i in r["images"].items()}
        info = {k: v for k, v in r.items()
                if k not in ("prep_state", "prep", "final", "images", "label")}
        out.append((r["label"], machine.unitaries[r["prep"]], machine.unitaries[r["final"]],
                    images, info))
    return base, out


def transform_overgroup(machine: QcfaMachine, table: CosetTable) -> QcfaMachine:
    """Machine for the overgroup: each right-to-left pass tracks the coset index,
    feeds the rewritten base-group letters to the simulated register, and
    rejects at the left marker unless the pass ends in the trivial coset."""
    s = machine.structure
    if s.get("kind") not in LOOP_KINDS:
        raise MachineError("overgroup transform needs an assembled loop machine")
    if s.get("coset_table") is not None:
        raise MachineError("nested overgroup transforms are not supported")
    if table.base != machine.group:
        raise MachineError("coset table base does not match the machine's alphabet")
    validate_coset_table(table)
    base, rounds = _rounds_from_structure(machine)
    beta_max = max(1, table.max_beta_length)
    params = dict(s["params"], beta_max=beta_max)
    coin = s["coin"]
    d = machine.d
    if coin is not None:
        tau = TauModel.from_json(params["tau"])
        if coin["type"] == "R":
            coin = poly_coin_parameters(tau, d, params["eps"], beta_max)
        else:
            coin = exp_coin_parameters(tau, d, params["eps"], beta_max, coin["reading"])
    group = virtual_overgroup(table.base, table)
    return _build_loop(group, base, d, machine.backend, rounds, coin, table, s["kind"], params,
                       f"overgroup[{table.name}]{machine.label}")


# ---------------------------------------------------------------------------
# one-way machine


def build_mo1qfa(f: Dfr) -> QcfaMachine:
    """Hadamard test on control (x) system (x) reference of dimension 2 D^2 with
    D = k d: the reference register receives the transposed images under the
    control, and the control is measured after a final Hadamard at the right
    marker.  Accepts with probability (1 + Re chi(w)/D)/2."""
    if not f.certified:
        raise DfrError("the DFR must be certified")
    rep = dfr_combine(f).reps[0]
    big_d = rep.dim
    backend = BIGFLOAT if rep.backend == BIGFLOAT else EXACT
    dim = 2 * big_d * big_d
    eye_d = Matrix.identity(big_d, backend)
    eye_half = Matrix.identity(big_d * big_d, backend)
    b = MachineBuilder(f.group, dim, backend)
    letters = b.letters()
    start = b.state("start")
    read = b.state("read")
    meas = b.state("meas")
    # initial state (|0> + |1>)/sqrt 2 (x) (1/sqrt D) sum_u |u>|u>
    if backend == EXACT:
        amp = Exact.sqrt(Fraction(1, 2 * big_d))
        zero = Exact.from_rational(0)
    else:
        amp = 1 / mpmath.sqrt(2 * big_d)
        zero = mpmath.mpc(0)
    amps = [zero] * dim
    for half in (0, 1):
        for u in range(big_d):
            amps[half * big_d * big_d + u * big_d + u] = amp
    init = StateVector(amps, backend)
    prep = b.unitary(transition_unitary(StateVector.basis(dim, 0, backend), init))
    letter_idx = {}
    for c in letters:
        img = _as_backend(rep.symbol_image(c), backend)
        transposed = Matrix([[img.rows[j][i] for j in range(big_d)] for i in range(big_d)], backend,
                            amplitude_class=img.amplitude_class)
        controlled = block_diagonal([eye_half, kron(eye_d, transposed)])
        letter_idx[c] = b.unitary(controlled)
        b.go(read, c, letter_idx[c], read, 1)
    had = b.unitary(kron(coin_unitary(2, backend), eye_half))
    b.go(start, LEFT, prep, read, 1)
    b.go(read, RIGHT, had, meas, 0)
    half = big_d * big_d
    b.on(meas, RIGHT, MeasureAction(
        MeasurementPartition((tuple(range(half, dim)), tuple(range(half)))),
        ((b.reject, 0), (b.accept, 0))))
    structure = {"kind": "oneway", "prep": prep, "final": had,
                 "letters": {str(c): i for c, i in letter_idx.items()},
                 "accept_block": 1, "params": {"D": big_d, "k": f.k, "d": f.d}}
    return b.build(start, structure, f"mo1qfa[{f.label}]")


# ---------------------------------------------------------------------------
# standalone gadgets


def _standalone(group: GroupPresentation | None):
    return group if group is not None else free_abelian_group(1)


def sub_r_machine(m: int, y: int, group: GroupPresentation | None = None, d: int = 2) -> QcfaMachine:
    """Accepts iff sub_R(m, y) returns 1; started at the left marker."""
    b = MachineBuilder(_standalone(group), d, EXACT)
    start = b.state("start")
    entry = sub_r_fragment(b, "coin", m, y, b.reject, b.reject, b.accept)
    b.go(start, LEFT, None, entry, 1)
    coin = {"type": "R", "m": m, "y": y, "entry": entry}
    return b.build(start, {"kind": "coin", "coin": coin, "entry_steps": 1}, f"sub_R({m},{y})")


def sub_rprime_machine(p, y: int, group: GroupPresentation | None = None,
                       d: int = 2) -> QcfaMachine:
    b = MachineBuilder(_standalone(group), d, EXACT)
    start = b.state("start")
    entry = sub_rprime_fragment(b, "coin", p, y, b.reject, b.reject, b.accept)
    b.go(start, LEFT, None, entry, 1)
    coin = {"type": "Rprime", "p": str(Fraction(p)), "y": y, "entry": entry}
    return b.build(start, {"kind": "coin", "coin": coin, "entry_steps": 1},
                   f"sub_Rprime({Fraction(p)},{y})")


def sub_b_machine(p, group: GroupPresentation | None = None, d: int = 2) -> QcfaMachine:
    """Accepts iff the p-biased coin returns 1; a fair coin for p = 1/2."""
    p = Fraction(p)
    b = MachineBuilder(_standalone(group), d, EXACT)
    start = b.state("start")
    meas = b.state("coinm")
    fixs = b.state("coinfix")
    prep = b.unitary(transition_unitary(_basis(d, 0, EXACT), biased_state(d, p, EXACT)))
    fix = b.unitary(reset_unitary(d, EXACT))
    b.go(start, LEFT, prep, meas, 0)
    b.on(meas, LEFT, MeasureAction(MeasurementPartition.standard(d), ((fixs, 0), (b.accept, 0))))
    b.go(fixs, LEFT, fix, b.reject, 0)
    coin = {"type": "B", "p": str(p), "entry": start}
    return b.build(start, {"kind": "coin", "coin": coin, "entry_steps": 0}, f"sub_B({p})")


def trivial_machine(accept: bool = True, group: GroupPresentation | None = None) -> QcfaMachine:
    b = MachineBuilder(_standalone(group), 1, EXACT)
    start = b.state("start")
    b.go(start, LEFT, None, b.accept if accept else b.reject, 0)
    return b.build(start, {"kind": "trivial", "accept": accept},
                   "accept-all" if accept else "reject-all")


def fair_coin_machine(group: GroupPresentation | None = None) -> QcfaMachine:
    return sub_b_machine(Fraction(1, 2), group)
