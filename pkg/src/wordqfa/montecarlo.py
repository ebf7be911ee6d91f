"""Monte Carlo execution of machines: a compiled kernel and a reference stepper.

Each trial draws from its own splitmix64 stream seeded from (seed, trial
index), so results are reproducible bit for bit and independent of how
trials are scheduled."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import config, njit, prange, set_num_threads
from scipy.stats import binomtest

from .machine import LEFT, RIGHT, MeasureAction, QcfaMachine, UnitaryAction

# the bundled TBB is too old for numba; the portable layer avoids a warning
if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "workqueue"

DEFAULT_STEP_LIMIT = 10**8
ACCEPT, REJECT, STEP_LIMIT = 1, 0, 2
_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


# ---------------------------------------------------------------------------
# compiled tables


@dataclass
class CompiledMachine:
    kind: np.ndarray
    unitary: np.ndarray
    next_state: np.ndarray
    move: np.ndarray
    partition: np.ndarray
    branch_next: np.ndarray
    branch_move: np.ndarray
    block_of: np.ndarray
    block_count: np.ndarray
    matrices: np.ndarray
    is_identity: np.ndarray
    start: int
    accept: int
    reject: int
    letter_offset: int
    symbol_index: np.ndarray


def compile_machine(machine: QcfaMachine) -> CompiledMachine:
    cached = machine._cache.get("compiled")
    if cached is not None:
        return cached
    states = {s: i for i, s in enumerate(machine.states)}
    alphabet = machine.group.alphabet
    g = machine.group.generator_count
    symbols = [LEFT, RIGHT, *alphabet]
    sym_index = {s: i for i, s in enumerate(symbols)}
    n_states, n_sym, d = len(states), len(symbols), machine.d
    partitions: list = []
    part_index: dict = {}
    max_blocks = 2
    for act in machine.delta.values():
        if isinstance(act, MeasureAction):
            max_blocks = max(max_blocks, len(act.partition.blocks))
    kind = np.full((n_states, n_sym), -1, dtype=np.int8)
    unitary = np.zeros((n_states, n_sym), dtype=np.int64)
    next_state = np.zeros((n_states, n_sym), dtype=np.int64)
    move = np.zeros((n_states, n_sym), dtype=np.int64)
    partition = np.zeros((n_states, n_sym), dtype=np.int64)
    branch_next = np.zeros((n_states, n_sym, max_blocks), dtype=np.int64)
    branch_move = np.zeros((n_states, n_sym, max_blocks), dtype=np.int64)
    for (c, sym), act in machine.delta.items():
        i, j = states[c], sym_index[sym]
        if isinstance(act, UnitaryAction):
            kind[i, j] = 0
            unitary[i, j] = act.unitary
            next_state[i, j] = states[act.next]
            move[i, j] = act.move
        else:
            kind[i, j] = 1
            key = act.partition.blocks
            if key not in part_index:
                part_index[key] = len(partitions)
                partitions.append(key)
            partition[i, j] = part_index[key]
            for r, (nxt, mv) in enumerate(act.branches):
                branch_next[i, j, r] = states[nxt]
                branch_move[i, j, r] = mv
    block_of = np.zeros((max(1, len(partitions)), d), dtype=np.int64)
    block_count = np.zeros(max(1, len(partitions)), dtype=np.int64)
    for p, blocks in enumerate(partitions):
        block_count[p] = len(blocks)
        for r, block in enumerate(blocks):
            for q in block:
                block_of[p, q] = r
    mats = np.array([u.to_numpy() for u in machine.unitaries], dtype=np.complex128)
    ident = np.array([np.array_equal(m, np.eye(d)) for m in mats], dtype=np.bool_)
    lookup = np.zeros(2 * g + 1, dtype=np.int64)
    for code in alphabet:
        lookup[code + g] = sym_index[code]
    out = CompiledMachine(kind, unitary, next_state, move, partition, branch_next, branch_move,
                          block_of, block_count, mats, ident, states[machine.start],
                          states[machine.accept], states[machine.reject], g, lookup)
    machine._cache["compiled"] = out
    return out


def encode_tape(cm: CompiledMachine, word: Sequence[int]) -> np.ndarray:
    tape = np.empty(len(word) + 2, dtype=np.int64)
    tape[0] = 0
    tape[-1] = 1
    for i, c in enumerate(word):
        tape[i + 1] = cm.symbol_index[c + cm.letter_offset]
    return tape


# ---------------------------------------------------------------------------
# random streams


def _splitmix_py(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return state, z ^ (z >> 31)


def trial_stream_seed(seed: int, trial: int) -> int:
    _, a = _splitmix_py(seed & _MASK)
    _, b = _splitmix_py((a + trial) & _MASK)
    return b


@njit(cache=True)
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _stream_seed(seed, trial):
    _, a = _splitmix(seed)
    _, b = _splitmix(a + trial)
    return b


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True, parallel=True)
def _run_trials(kind, unitary, next_state, move, partition, branch_next, branch_move, block_of,
                block_count, mats, is_identity, start, accept, reject, tape, seed, first_trial,
                n_trials, step_limit, verdicts, steps_out):
    d = mats.shape[1]
    for t in prange(n_trials):
        psi = np.zeros(d, dtype=np.complex128)
        tmp = np.zeros(d, dtype=np.complex128)
        probs = np.zeros(branch_next.shape[2], dtype=np.float64)
        rng = _stream_seed(np.uint64(seed), np.uint64(first_trial + t))
        psi[0] = 1.0
        c = start
        h = 0
        steps = 0
        verdict = STEP_LIMIT
        while True:
            if c == accept:
                verdict = ACCEPT
                break
            if c == reject:
                verdict = REJECT
                break
            if steps >= step_limit:
                break
            y = tape[h]
            if kind[c, y] == 0:
                u = unitary[c, y]
                if not is_identity[u]:
                    for i in range(d):
                        acc = 0.0 + 0.0j
                        for j in range(d):
                            acc += mats[u, i, j] * psi[j]
                        tmp[i] = acc
                    for i in range(d):
                        psi[i] = tmp[i]
                h += move[c, y]
                c = next_state[c, y]
            else:
                p = partition[c, y]
                nb = block_count[p]
                for r in range(nb):
                    probs[r] = 0.0
                total = 0.0
                for i in range(d):
                    w = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                    probs[block_of[p, i]] += w
                    total += w
                rng, z = _splitmix(rng)
                target = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0) * total
                chosen = -1
                cum = 0.0
                for r in range(nb):
                    if probs[r] > 0.0:
                        chosen = r
                        cum += probs[r]
                        if target < cum:
                            break
                norm = math.sqrt(probs[chosen])
                for i in range(d):
                    if block_of[p, i] == chosen:
                        psi[i] = psi[i] / norm
                    else:
                        psi[i] = 0.0
                h += branch_move[c, y, chosen]
                c = branch_next[c, y, chosen]
            steps += 1
        verdicts[t] = verdict
        steps_out[t] = steps


def set_threads(count: int) -> None:
    """Cap the number of worker threads used by the trial kernel."""
    set_num_threads(max(1, int(count)))


def run_trials(machine: QcfaMachine, word: Sequence[int], trials: int, seed: int,
               step_limit: int = DEFAULT_STEP_LIMIT, first_trial: int = 0):
    """Per-trial verdicts (1 accept, 0 reject, 2 step limit) and step counts."""
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cm = compile_machine(machine)
    tape = encode_tape(cm, machine.group.check_word(word))
    verdicts = np.zeros(trials, dtype=np.int8)
    steps = np.zeros(trials, dtype=np.int64)
    _run_trials(cm.kind, cm.unitary, cm.next_state, cm.move, cm.partition, cm.branch_next,
                cm.branch_move, cm.block_of, cm.block_count, cm.matrices, cm.is_identity,
                cm.start, cm.accept, cm.reject, tape, np.uint64(seed & _MASK), first_trial,
                trials, step_limit, verdicts, steps)
    return verdicts, steps


def reference_trial(machine: QcfaMachine, word: Sequence[int], seed: int, trial: int,
                    step_limit: int = DEFAULT_STEP_LIMIT) -> tuple[int, int]:
    """Pure-Python stepper with the kernel's semantics and random stream."""
    cm = compile_machine(machine)
    tape = encode_tape(cm, machine.group.check_word(word))
    d = cm.matrices.shape[1]
    rng = trial_stream_seed(seed & _MASK, trial)
    psi = [0j] * d
    psi[0] = 1 + 0j
    c, h, steps = cm.start, 0, 0
    while True:
        if c == cm.accept:
            return ACCEPT, steps
        if c == cm.reject:
            return REJECT, steps
        if steps >= step_limit:
            return STEP_LIMIT, steps
        y = int(tape[h])
        if cm.kind[c, y] == 0:
            u = int(cm.unitary[c, y])
            if not cm.is_identity[u]:
                m = cm.matrices[u]
                new = []
                for i in range(d):
                    acc = 0j
                    for j in range(d):
                        acc += complex(m[i, j]) * psi[j]
                    new.append(acc)
                psi = new
            h += int(cm.move[c, y])
            c = int(cm.next_state[c, y])
        else:
            p = int(cm.partition[c, y])
            nb = int(cm.block_count[p])
            probs = [0.0] * nb
            total = 0.0
            for i in range(d):
                w = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                probs[int(cm.block_of[p, i])] += w
                total += w
            rng, z = _splitmix_py(rng)
            target = (z >> 11) * (1.0 / 9007199254740992.0) * total
            chosen, cum = -1, 0.0
            for r in range(nb):
                if probs[r] > 0.0:
                    chosen = r
                    cum += probs[r]
                    if target < cum:
                        break
            norm = math.sqrt(probs[chosen])
            psi = [psi[i] / norm if cm.block_of[p, i] == chosen else 0j for i in range(d)]
            h += int(cm.branch_move[c, y, chosen])
            c = int(cm.branch_next[c, y, chosen])
        steps += 1


# ---------------------------------------------------------------------------
# statistics


@dataclass
class AcceptanceStats:
    trials: int
    accepts: int
    rejects: int
    step_limited: int
    accept_freq: float
    reject_freq: float
    mean_steps: float
    steps_std: float
    ci_low: float
    ci_high: float
    seed: int

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.__dict__))
        w.writeheader()
        w.writerow(self.__dict__)
        return buf.getvalue()


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def run_montecarlo(machine: QcfaMachine, word: Sequence[int], trials: int, seed: int,
                   step_limit: int = DEFAULT_STEP_LIMIT) -> AcceptanceStats:
    verdicts, steps = run_trials(machine, word, trials, seed, step_limit)
    acc = int(np.count_nonzero(verdicts == ACCEPT))
    rej = int(np.count_nonzero(verdicts == REJECT))
    lim = trials - acc - rej
    done = acc + rej
    finished = steps[verdicts != STEP_LIMIT]
    mean = float(finished.mean()) if done else float("nan")
    std = float(finished.std(ddof=1)) if done > 1 else 0.0
    lo, hi = wilson_interval(acc, done)
    return AcceptanceStats(trials, acc, rej, lim, acc / done if done else float("nan"),
                           rej / done if done else float("nan"), mean, std, lo, hi, seed)
