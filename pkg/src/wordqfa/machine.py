"""Two-way finite automata with a classical control and a quantum register."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .groups import GroupPresentation, Word
from .linalg import (BIGFLOAT, EXACT, AmplitudeClass, Matrix, MeasurementPartition, StateVector,
                     _normalize_numeric, apply, join_class, project)

LEFT = "#L"
RIGHT = "#R"
MARKERS = (LEFT, RIGHT)


class MachineError(ValueError):
    pass


@dataclass(frozen=True)
class UnitaryAction:
    unitary: int
    next: str
    move: int


@dataclass(frozen=True)
class MeasureAction:
    partition: MeasurementPartition
    branches: tuple  # (next state, move) per block


def tape_symbols(word: Sequence[int]) -> list:
    return [LEFT, *word, RIGHT]


@dataclass
class QcfaMachine:
    group: GroupPresentation
    d: int
    states: tuple
    start: str
    accept: str
    reject: str
    unitaries: list
    delta: dict
    structure: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        self.states = tuple(self.states)
        self._cache: dict = {}
        self.validate()

    @property
    def symbols(self) -> tuple:
        return (LEFT, RIGHT, *self.group.alphabet)

    @property
    def amplitude_class(self) -> AmplitudeClass:
        used = {a.unitary for a in self.delta.values() if isinstance(a, UnitaryAction)}
        return join_class(*(self.unitaries[i].amplitude_class for i in used))

    @property
    def backend(self) -> str:
        return BIGFLOAT if any(u.backend == BIGFLOAT for u in self.unitaries) else EXACT

    @property
    def round_structured(self) -> bool:
        return self.structure.get("kind") in ("poly", "exp", "unbounded", "oneway", "coin",
                                              "trivial")

    def validate(self) -> None:
        names = set(self.states)
        if len(names) != len(self.states):
            raise MachineError("duplicate classical state names")
        for s in (self.start, self.accept, self.reject):
            if s not in names:
                raise MachineError(f"state {s!r} is not declared")
        if self.accept == self.reject:
            raise MachineError("accept and reject states must differ")
        for u in self.unitaries:
            if u.dim != self.d:
                raise MachineError("unitary dimension does not match the register")
            if not u.is_unitary():
                raise MachineError("transition matrix is not unitary")
        for c in self.states:
            if c in (self.accept, self.reject):
                continue
            for g in self.symbols:
                act = self.delta.get((c, g))
                if act is None:
                    raise MachineError(f"delta undefined at ({c}, {g})")
                for nxt, mv in _targets(act):
                    if nxt not in names:
                        raise MachineError(f"unknown target state {nxt!r}")
                    if mv not in (-1, 0, 1):
                        raise MachineError("head moves must be -1, 0 or +1")
                    if (g == LEFT and mv == -1) or (g == RIGHT and mv == 1):
                        raise MachineError(f"transition at ({c}, {g}) leaves the tape")
                if isinstance(act, MeasureAction) and act.partition.dim != self.d:
                    raise MachineError("measurement partition does not match the register")
                if isinstance(act, UnitaryAction) and not 0 <= act.unitary < len(self.unitaries):
                    raise MachineError("unitary index out of range")

    # semantics ---------------------------------------------------------------
    def initial_config(self) -> "MachineConfig":
        return MachineConfig(self.start, 0, StateVector.basis(self.d, 0, self.backend))

    def step_branches(self, cfg: "MachineConfig", tape: list):
        """All successors of a configuration as (probability, config); the
        register of each successor is left unnormalized."""
        if cfg.state in (self.accept, self.reject):
            raise MachineError("halted configurations have no successors")
        g = tape[cfg.head]
        act = self.delta[(cfg.state, g)]
        if isinstance(act, UnitaryAction):
            psi = apply(self.unitaries[act.unitary], cfg.psi)
            return [(None, MachineConfig(act.next, _move(cfg.head, act.move, tape), psi))]
        out = []
        for r, block in enumerate(act.partition.blocks):
            branch = project(cfg.psi, block)
            p = branch.norm2()
            nxt, mv = act.branches[r]
            out.append((p, MachineConfig(nxt, _move(cfg.head, mv, tape), branch)))
        return out

    # serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        entries = []
        for (c, g), act in sorted(self.delta.items(), key=lambda kv: (
                self.states.index(kv[0][0]), _symbol_rank(kv[0][1]))):
            sym = g if g in MARKERS else self.group.format_word((g,))
            if isinstance(act, UnitaryAction):
                a = {"unitary": act.unitary, "next": act.next, "move": act.move}
            else:
                a = {"measure": act.partition.to_json(),
                     "branches": {str(r): [nxt, mv] for r, (nxt, mv) in enumerate(act.branches)}}
            entries.append({"state": c, "symbol": sym, "action": a})
        return {
            "label": self.label,
            "d": self.d,
            "group": self.group.to_json(),
            "classical_states": list(self.states),
            "start": self.start,
            "accept": self.accept,
            "reject": self.reject,
            "amplitude_class": self.amplitude_class.label,
            "unitaries": [u.to_json() for u in self.unitaries],
            "delta": entries,
            "structure": self.structure,
        }

    @classmethod
    def from_json(cls, data: dict) -> "QcfaMachine":
        group = GroupPresentation.from_json(data["group"])
        delta = {}
        for e in data["delta"]:
            sym = e["symbol"]
            g = sym if sym in MARKERS else group.parse_word(sym)[0]
            a = e["action"]
            if "unitary" in a:
                act = UnitaryAction(int(a["unitary"]), a["next"], int(a["move"]))
            else:
                part = MeasurementPartition.from_json(a["measure"])
                br = tuple((a["branches"][str(r)][0], int(a["branches"][str(r)][1]))
                           for r in range(len(part.blocks)))
                act = MeasureAction(part, br)
            delta[(e["state"], g)] = act
        return cls(group, int(data["d"]), tuple(data["classical_states"]), data["start"],
                   data["accept"], data["reject"],
                   [Matrix.from_json(u) for u in data["unitaries"]], delta,
                   data.get("structure", {}), data.get("label", ""))

    def structurally_equal(self, other: "QcfaMachine") -> bool:
        return (self.group == other.group and self.d == other.d and self.states == other.states
                and (self.start, self.accept, self.reject) == (other.start, other.accept,
                                                               other.reject)
                and self.unitaries == other.unitaries and self.delta == other.delta
                and self.structure == other.structure)


def _symbol_rank(g):
    if g == LEFT:
        return (0, 0)
    if g == RIGHT:
        return (1, 0)
    return (2, 2 * (abs(g) - 1) + (g < 0))


def _targets(act):
    if isinstance(act, UnitaryAction):
        return [(act.next, act.move)]
    return list(act.branches)


def _move(head: int, mv: int, tape: list) -> int:
    h = head + mv
    if not 0 <= h < len(tape):
        raise MachineError("head left the tape")
    return h


@dataclass
class MachineConfig:
    state: str
    head: int
    psi: StateVector


class MachineBuilder:
    """Accumulates states, deduplicated unitaries and transitions."""

    def __init__(self, group: GroupPresentation, d: int, backend: str = EXACT):
        self.group = group
        self.d = d
        self.backend = backend
        self.states: list[str] = []
        self.unitaries: list[Matrix] = []
        self._index: dict = {}
        self.delta: dict = {}
        self.accept = self.state("accept")
        self.reject = self.state("reject")
        self.identity = self.unitary(Matrix.identity(d, backend))

    def state(self, name: str) -> str:
        if name in self.states:
            raise MachineError(f"state {name!r} declared twice")
        self.states.append(name)
        return name

    def unitary(self, m: Matrix) -> int:
        key = (m.backend, m.rows)
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.unitaries)
            self.unitaries.append(m)
            self._index[key] = idx
        return idx

    def on(self, state: str, symbols, action) -> None:
        if symbols in MARKERS or isinstance(symbols, int):
            symbols = (symbols,)
        for g in symbols:
            if (state, g) in self.delta:
                raise MachineError(f"transition ({state}, {g}) defined twice")
            self.delta[(state, g)] = action

    def go(self, state: str, symbols, unitary: int | None, nxt: str, move: int) -> None:
        self.on(state, symbols, UnitaryAction(self.identity if unitary is None else unitary,
                                              nxt, move))

    def letters(self) -> tuple:
        return self.group.alphabet

    def build(self, start: str, structure: dict, label: str = "") -> QcfaMachine:
        # unreachable combinations halt in the reject state without moving
        for c in self.states:
            if c in (self.accept, self.reject):
                continue
            for g in (LEFT, RIGHT, *self.group.alphabet):
                self.delta.setdefault((c, g), UnitaryAction(self.identity, self.reject, 0))
        order = [self.accept, self.reject]
        rest = [s for s in self.states if s not in order]
        return QcfaMachine(self.group, self.d, tuple(rest + order), start, self.accept,
                           self.reject, list(self.unitaries), dict(self.delta), structure, label)


def run_exact_path(machine: QcfaMachine, word: Word, choices: Sequence[int], max_steps: int = 10**6):
    """Follow one branch sequence (one measurement result per entry of choices)
    and return (final config, path probability, steps).  Stops at a halting
    state, when the choices run out at a measurement, or after max_steps."""
    tape = tape_symbols(word)
    cfg = machine.initial_config()
    prob = None
    steps = 0
    it = iter(choices)
    while cfg.state not in (machine.accept, machine.reject) and steps < max_steps:
        act = machine.delta[(cfg.state, tape[cfg.head])]
        if isinstance(act, MeasureAction):
            try:
                r = next(it)
            except StopIteration:
                break
            p, cfg = machine.step_branches(cfg, tape)[r]
            prob = p if prob is None else prob * p
            cfg = MachineConfig(cfg.state, cfg.head, _renormalize(cfg.psi, p))
        else:
            _, cfg = machine.step_branches(cfg, tape)[0]
        steps += 1
    return cfg, prob, steps


def _renormalize(psi: StateVector, p):
    """Post-measurement state, up to a global phase when the block is a single
    basis state (kept exact in that case)."""
    nz = [i for i, x in enumerate(psi.amps) if not _zero_amp(x)]
    if psi.backend == EXACT and len(nz) == 1:
        return StateVector.basis(psi.dim, nz[0], EXACT)
    if psi.backend == EXACT:
        return _normalize_numeric(psi.to_bigfloat(), p.to_mpc().real)
    return _normalize_numeric(psi, p)


def _zero_amp(x) -> bool:
    if hasattr(x, "is_zero"):
        return x.is_zero()
    return x == 0
