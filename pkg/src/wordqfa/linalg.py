"""Dual-backend complex linear algebra: exact multiquadratic and mpmath BigFloat."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .exact import ONE, ZERO, Exact, exact_root_of_unity

EXACT = "exact"
BIGFLOAT = "bigfloat"
DEFAULT_PRECISION = 256


class AmplitudeClass(IntEnum):
    ALGEBRAIC_EXACT = 0
    ALGEBRAIC_NUMERIC = 1
    CTILDE_NUMERIC = 2
    GENERIC_NUMERIC = 3

    @property
    def label(self) -> str:
        return _CLASS_LABELS[self]

    @classmethod
    def from_label(cls, s: str) -> "AmplitudeClass":
        return {v: k for k, v in _CLASS_LABELS.items()}[s]


_CLASS_LABELS = {
    AmplitudeClass.ALGEBRAIC_EXACT: "AlgebraicExact",
    AmplitudeClass.ALGEBRAIC_NUMERIC: "AlgebraicNumeric",
    AmplitudeClass.CTILDE_NUMERIC: "CTildeNumeric",
    AmplitudeClass.GENERIC_NUMERIC: "GenericNumeric",
}


def join_class(*classes) -> AmplitudeClass:
    return AmplitudeClass(max((int(c) for c in classes), default=0))


@dataclass(frozen=True)
class ToleranceProfile:
    precision_bits: int = DEFAULT_PRECISION
    eps_override: float | None = None

    def __post_init__(self):
        if self.precision_bits < 64:
            raise ValueError("precision must be at least 64 bits")

    @property
    def eps(self):
        if self.eps_override is not None:
            return mpmath.mpf(self.eps_override)
        return mpmath.mpf(2) ** (-(self.precision_bits // 2))


DEFAULT_TOLERANCE = ToleranceProfile()


def to_bigfloat_scalar(x, prec: int = DEFAULT_PRECISION):
    if isinstance(x, Exact):
        return x.to_mpc(prec)
    with mpmath.workprec(prec):
        if isinstance(x, Fraction):
            return mpmath.mpc(mpmath.mpf(x.numerator) / x.denominator)
        return mpmath.mpc(x)


def abs2(x):
    if isinstance(x, Exact):
        return x.abs2()
    return x.real * x.real + x.imag * x.imag


def _zero(backend):
    return ZERO if backend == EXACT else mpmath.mpc(0)


def _one(backend):
    return ONE if backend == EXACT else mpmath.mpc(1)


class Matrix:
    """Square complex matrix with immutable rows."""

    __slots__ = ("rows", "dim", "backend", "prec", "amplitude_class", "_np")

    def __init__(self, rows, backend: str = EXACT, prec: int = DEFAULT_PRECISION,
                 amplitude_class: AmplitudeClass | None = None):
        rows = tuple(tuple(r) for r in rows)
        d = len(rows)
        if any(len(r) != d for r in rows):
            raise ValueError("matrix must be square")
        if backend == EXACT:
            rows = tuple(tuple(Exact.coerce(x) for x in r) for r in rows)
        elif backend == BIGFLOAT:
            rows = tuple(tuple(to_bigfloat_scalar(x, prec) for x in r) for r in rows)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        self.rows = rows
        self.dim = d
        self.backend = backend
        self.prec = prec
        if amplitude_class is None:
            amplitude_class = (AmplitudeClass.ALGEBRAIC_EXACT if backend == EXACT
                               else AmplitudeClass.GENERIC_NUMERIC)
        self.amplitude_class = AmplitudeClass(amplitude_class)
        self._np = None

    # construction helpers ----------------------------------------------
    @classmethod
    def identity(cls, d: int, backend: str = EXACT, prec: int = DEFAULT_PRECISION):
        z, o = _zero(backend), _one(backend)
        return cls([[o if i == j else z for j in range(d)] for i in range(d)], backend, prec,
                   AmplitudeClass.ALGEBRAIC_EXACT)

    @classmethod
    def diagonal(cls, entries, backend: str = EXACT, prec: int = DEFAULT_PRECISION,
                 amplitude_class=None):
        d = len(entries)
        z = _zero(backend)
        return cls([[entries[i] if i == j else z for j in range(d)] for i in range(d)],
                   backend, prec, amplitude_class)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __matmul__(self, other: "Matrix") -> "Matrix":
        return mat_mul(self, other)

    def dagger(self) -> "Matrix":
        d = self.dim
        with mpmath.workprec(self.prec):
            rows = tuple(tuple(self.rows[j][i].conjugate() for j in range(d)) for i in range(d))
        return Matrix._raw(rows, self)

    @classmethod
    def _raw(cls, rows, like: "Matrix", amplitude_class=None, backend=None, prec=None):
        m = object.__new__(cls)
        m.rows = rows
        m.dim = len(rows)
        m.backend = backend or like.backend
        m.prec = prec or like.prec
        m.amplitude_class = like.amplitude_class if amplitude_class is None else amplitude_class
        m._np = None
        return m

    def trace(self):
        with mpmath.workprec(self.prec):
            t = _zero(self.backend)
            for i in range(self.dim):
                t = t + self.rows[i][i]
            return t

    def scale(self, c) -> "Matrix":
        if self.backend == EXACT:
            c = Exact.coerce(c)
            return Matrix._raw(tuple(tuple(x * c for x in r) for r in self.rows), self)
        with mpmath.workprec(self.prec):
            c = to_bigfloat_scalar(c, self.prec)
            return Matrix._raw(tuple(tuple(x * c for x in r) for r in self.rows), self)

    def to_bigfloat(self, prec: int | None = None) -> "Matrix":
        prec = prec or self.prec
        if self.backend == BIGFLOAT and prec == self.prec:
            return self
        rows = tuple(tuple(to_bigfloat_scalar(x, prec) for x in r) for r in self.rows)
        return Matrix._raw(rows, self, backend=BIGFLOAT, prec=prec)

    def to_numpy(self) -> np.ndarray:
        if self._np is None:
            self._np = np.array([[complex(x) for x in r] for r in self.rows], dtype=complex)
        return self._np

    def is_diagonal(self) -> bool:
        return all(_is_zero(self.rows[i][j]) for i in range(self.dim)
                   for j in range(self.dim) if i != j)

    def max_abs_diff(self, other: "Matrix"):
        prec = max(self.prec, other.prec)
        with mpmath.workprec(prec):
            worst = mpmath.mpf(0)
            for r1, r2 in zip(self.rows, other.rows):
                for x, y in zip(r1, r2):
                    if isinstance(x, Exact) and isinstance(y, Exact):
                        if x == y:
                            continue
                    diff = to_bigfloat_scalar(x, prec) - to_bigfloat_scalar(y, prec)
                    worst = max(worst, abs(diff))
            return worst

    def equals(self, other: "Matrix", tol=None) -> bool:
        if self.dim != other.dim:
            return False
        if self.backend == EXACT and other.backend == EXACT:
            return self.rows == other.rows
        if tol is None:
            tol = ToleranceProfile(max(self.prec, other.prec)).eps
        return self.max_abs_diff(other) <= tol

    def is_unitary(self, tol=None) -> bool:
        return (self.dagger() @ self).equals(Matrix.identity(self.dim, self.backend, self.prec), tol)

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return (self.backend == other.backend and self.rows == other.rows
                and self.amplitude_class == other.amplitude_class)

    def __hash__(self):
        return hash((self.backend, self.rows))

    def __repr__(self):
        return f"Matrix(dim={self.dim}, backend={self.backend}, rows={self.rows!r})"

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        out = {"dim": self.dim, "backend": self.backend,
               "entries": [[scalar_to_json(x, self.prec) for x in r] for r in self.rows],
               "class": self.amplitude_class.label}
        if self.backend == BIGFLOAT:
            out["precision"] = self.prec
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Matrix":
        backend = data["backend"]
        prec = int(data.get("precision", DEFAULT_PRECISION))
        rows = [[scalar_from_json(x, backend, prec) for x in r] for r in data["entries"]]
        return cls(rows, backend, prec, AmplitudeClass.from_label(data["class"]))


def scalar_to_json(x, prec: int = DEFAULT_PRECISION):
    if isinstance(x, Exact):
        return x.to_json()
    digits = int(prec * 0.30103) + 2
    return [mpmath.nstr(x.real, digits), mpmath.nstr(x.imag, digits)]


def scalar_from_json(data, backend: str, prec: int = DEFAULT_PRECISION):
    if backend == EXACT:
        return Exact.from_json(data)
    with mpmath.workprec(prec):
        return mpmath.mpc(mpmath.mpf(data[0]), mpmath.mpf(data[1]))


def _is_zero(x) -> bool:
    if isinstance(x, Exact):
        return x.is_zero()
    return x == 0


def _coerce_pair(a: Matrix, b: Matrix):
    if a.backend == b.backend:
        return a, b
    prec = max(a.prec, b.prec)
    return a.to_bigfloat(prec), b.to_bigfloat(prec)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch {a.dim} vs {b.dim}")
    a, b = _coerce_pair(a, b)
    d = a.dim
    cols = list(zip(*b.rows))
    cls_ = join_class(a.amplitude_class, b.amplitude_class)
    with mpmath.workprec(a.prec):
        if a.backend == EXACT:
            rows = []
            for r in a.rows:
                nz = [(k, x) for k, x in enumerate(r) if x.terms]
                row = []
                for c in cols:
                    acc = ZERO
                    for k, x in nz:
                        y = c[k]
                        if y.terms:
                            acc = acc + x * y
                    row.append(acc)
                rows.append(tuple(row))
        else:
            rows = [tuple(mpmath.fsum(r[k] * c[k] for k in range(d)) for c in cols)
                    for r in a.rows]
    return Matrix._raw(tuple(rows), a, amplitude_class=cls_)


def kron(a: Matrix, b: Matrix) -> Matrix:
    a, b = _coerce_pair(a, b)
    da, db = a.dim, b.dim
    with mpmath.workprec(a.prec):
        rows = tuple(tuple(a.rows[i // db][j // db] * b.rows[i % db][j % db]
                           for j in range(da * db)) for i in range(da * db))
    return Matrix._raw(rows, a, amplitude_class=join_class(a.amplitude_class, b.amplitude_class))


def block_diagonal(blocks: Sequence[Matrix]) -> Matrix:
    backend = EXACT if all(m.backend == EXACT for m in blocks) else BIGFLOAT
    prec = max(m.prec for m in blocks)
    if backend == BIGFLOAT:
        blocks = [m.to_bigfloat(prec) for m in blocks]
    d = sum(m.dim for m in blocks)
    z = _zero(backend)
    rows = [[z] * d for _ in range(d)]
    off = 0
    for m in blocks:
        for i in range(m.dim):
            for j in range(m.dim):
                rows[off + i][off + j] = m.rows[i][j]
        off += m.dim
    return Matrix._raw(tuple(tuple(r) for r in rows), blocks[0], backend=backend, prec=prec,
                       amplitude_class=join_class(*(m.amplitude_class for m in blocks)))


class StateVector:
    __slots__ = ("amps", "dim", "backend", "prec")

    def __init__(self, amps, backend: str = EXACT, prec: int = DEFAULT_PRECISION):
        if backend == EXACT:
            amps = tuple(Exact.coerce(x) for x in amps)
        else:
            amps = tuple(to_bigfloat_scalar(x, prec) for x in amps)
        self.amps = amps
        self.dim = len(amps)
        self.backend = backend
        self.prec = prec

    @classmethod
    def basis(cls, d: int, k: int, backend: str = EXACT, prec: int = DEFAULT_PRECISION):
        z, o = _zero(backend), _one(backend)
        return cls([o if i == k else z for i in range(d)], backend, prec)

    @classmethod
    def _raw(cls, amps, backend, prec):
        v = object.__new__(cls)
        v.amps = tuple(amps)
        v.dim = len(v.amps)
        v.backend = backend
        v.prec = prec
        return v

    def norm2(self):
        with mpmath.workprec(self.prec):
            t = _zero(self.backend).real if self.backend == BIGFLOAT else ZERO
            for x in self.amps:
                t = t + abs2(x)
            return t

    def inner(self, other: "StateVector"):
        """<self|other>."""
        a, b = self, other
        if a.backend != b.backend:
            prec = max(a.prec, b.prec)
            a, b = a.to_bigfloat(prec), b.to_bigfloat(prec)
        with mpmath.workprec(a.prec):
            t = _zero(a.backend)
            for x, y in zip(a.amps, b.amps):
                t = t + x.conjugate() * y
            return t

    def to_bigfloat(self, prec: int | None = None) -> "StateVector":
        prec = prec or self.prec
        return StateVector._raw([to_bigfloat_scalar(x, prec) for x in self.amps], BIGFLOAT, prec)

    def to_numpy(self) -> np.ndarray:
        return np.array([complex(x) for x in self.amps], dtype=complex)

    def equals(self, other: "StateVector", tol=None) -> bool:
        if self.dim != other.dim:
            return False
        if self.backend == EXACT and other.backend == EXACT:
            return self.amps == other.amps
        prec = max(self.prec, other.prec)
        tol = ToleranceProfile(prec).eps if tol is None else tol
        with mpmath.workprec(prec):
            return all(abs(to_bigfloat_scalar(x, prec) - to_bigfloat_scalar(y, prec)) <= tol
                       for x, y in zip(self.amps, other.amps))

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.backend == other.backend and self.amps == other.amps

    def __hash__(self):
        return hash(self.amps)

    def __repr__(self):
        return f"StateVector({self.amps!r})"

    def to_json(self):
        return [scalar_to_json(x, self.prec) for x in self.amps]

    @classmethod
    def from_json(cls, data, backend: str, prec: int = DEFAULT_PRECISION):
        return cls._raw([scalar_from_json(x, backend, prec) for x in data], backend, prec)


def apply(m: Matrix, psi: StateVector) -> StateVector:
    if m.dim != psi.dim:
        raise ValueError(f"dimension mismatch {m.dim} vs {psi.dim}")
    if m.backend != psi.backend:
        prec = max(m.prec, psi.prec)
        m, psi = m.to_bigfloat(prec), psi.to_bigfloat(prec)
    with mpmath.workprec(m.prec):
        if m.backend == EXACT:
            out = []
            for r in m.rows:
                acc = ZERO
                for x, y in zip(r, psi.amps):
                    if x.terms and y.terms:
                        acc = acc + x * y
                out.append(acc)
        else:
            out = [mpmath.fsum(x * y for x, y in zip(r, psi.amps)) for r in m.rows]
    return StateVector._raw(out, m.backend, m.prec)


@dataclass(frozen=True)
class MeasurementPartition:
    """Blocks of 0-based basis indices; block r is measurement result r."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = [q for b in self.blocks for q in b]
        if any(len(b) == 0 for b in self.blocks):
            raise ValueError("empty measurement block")
        if len(seen) != len(set(seen)) or sorted(seen) != list(range(len(seen))):
            raise ValueError("blocks must partition the basis")

    @property
    def dim(self) -> int:
        return sum(len(b) for b in self.blocks)

    @classmethod
    def standard(cls, d: int) -> "MeasurementPartition":
        """B0 = {q2..qd}, B1 = {q1}."""
        return cls((tuple(range(1, d)), (0,)))

    def to_json(self):
        return [[q + 1 for q in b] for b in self.blocks]

    @classmethod
    def from_json(cls, data):
        return cls(tuple(tuple(q - 1 for q in b) for b in data))


def project(psi: StateVector, block: Sequence[int]) -> StateVector:
    """Unnormalized projection of psi onto the span of the block."""
    z = _zero(psi.backend)
    keep = set(block)
    return StateVector._raw([x if i in keep else z for i, x in enumerate(psi.amps)],
                            psi.backend, psi.prec)


def measure(psi: StateVector, partition: MeasurementPartition):
    """List of (result, probability, normalized post-state); zero branches omitted."""
    if partition.dim != psi.dim:
        raise ValueError("partition does not match the state dimension")
    out = []
    for r, block in enumerate(partition.blocks):
        branch = project(psi, block)
        p = branch.norm2()
        if psi.backend == EXACT:
            if p.is_zero():
                continue
            if p.is_rational():
                scale = Exact.sqrt(p.rational_value()).inverse()
                post = StateVector._raw([x * scale for x in branch.amps], EXACT, psi.prec)
            else:
                post = _normalize_numeric(branch.to_bigfloat(psi.prec), p.to_mpc(psi.prec).real)
            out.append((r, p, post))
        else:
            if p == 0:
                continue
            out.append((r, p, _normalize_numeric(branch, p)))
    return out


def _normalize_numeric(v: StateVector, p) -> StateVector:
    with mpmath.workprec(v.prec):
        s = 1 / mpmath.sqrt(p)
        return StateVector._raw([x * s for x in v.amps], BIGFLOAT, v.prec)


def dft_matrix(d: int, backend: str | None = None, prec: int = DEFAULT_PRECISION) -> Matrix:
    """F[u,v] = exp(-2 pi i u v / d)/sqrt(d), indices from 0."""
    if d < 2:
        raise ValueError("DFT dimension must be at least 2")
    exact_ok = 24 % d == 0
    if backend is None:
        backend = EXACT if exact_ok else BIGFLOAT
    if backend == EXACT:
        if not exact_ok:
            raise ValueError(f"DFT of size {d} is outside the exact field")
        s = Exact.sqrt(Fraction(1, d))
        rows = [[exact_root_of_unity(-u * v, d) * s for v in range(d)] for u in range(d)]
        return Matrix(rows, EXACT, prec, AmplitudeClass.ALGEBRAIC_EXACT)
    with mpmath.workprec(prec):
        s = 1 / mpmath.sqrt(d)
        rows = [[mpmath.expjpi(mpmath.mpf(-2 * ((u * v) % d)) / d) * s for v in range(d)]
                for u in range(d)]
    return Matrix(rows, BIGFLOAT, prec, AmplitudeClass.ALGEBRAIC_NUMERIC)


def permutation_matrix(d: int, v: int, backend: str = EXACT, prec: int = DEFAULT_PRECISION):
    """Permutation with a 1 at (1, v), 1-based v; column v goes to row 1 and the
    remaining columns go, in increasing order, to the remaining rows."""
    if not 1 <= v <= d:
        raise ValueError(f"v={v} out of range 1..{d}")
    target = {v - 1: 0}
    rest_cols = [c for c in range(d) if c != v - 1]
    for row, col in enumerate(rest_cols, start=1):
        target[col] = row
    z, o = _zero(backend), _one(backend)
    rows = [[z] * d for _ in range(d)]
    for col, row in target.items():
        rows[row][col] = o
    return Matrix(rows, backend, prec, AmplitudeClass.ALGEBRAIC_EXACT)


def transition_unitary(src: StateVector, dst: StateVector) -> Matrix:
    """Householder reflection taking src to dst; identity when they coincide.

    Requires <src|dst> to be real, which holds for every preparation used by
    the assemblers (basis states and real superpositions)."""
    if src.dim != dst.dim:
        raise ValueError("dimension mismatch")
    backend = EXACT if src.backend == dst.backend == EXACT else BIGFLOAT
    prec = max(src.prec, dst.prec)
    if backend == BIGFLOAT:
        src, dst = src.to_bigfloat(prec), dst.to_bigfloat(prec)
    d = src.dim
    if src == dst or (backend == BIGFLOAT and src.equals(dst)):
        return Matrix.identity(d, backend, prec)
    ip = src.inner(dst)
    with mpmath.workprec(prec):
        if backend == EXACT:
            if not ip.is_real():
                raise ValueError("exact transition needs a real overlap")
        elif abs(ip.imag) > ToleranceProfile(prec).eps:
            raise ValueError("transition needs a real overlap")
        v = [a - b for a, b in zip(src.amps, dst.amps)]
        vv = _zero(backend)
        for x in v:
            vv = vv + x * x.conjugate()
        if backend == EXACT:
            two_over = Exact.from_rational(2) / vv
        else:
            two_over = 2 / vv
        rows = []
        for i in range(d):
            row = []
            for j in range(d):
                e = _one(backend) if i == j else _zero(backend)
                row.append(e - v[i] * v[j].conjugate() * two_over)
            rows.append(tuple(row))
    cls_ = AmplitudeClass.ALGEBRAIC_EXACT if backend == EXACT else AmplitudeClass.GENERIC_NUMERIC
    return Matrix._raw(tuple(rows), Matrix.identity(1, backend, prec), amplitude_class=cls_,
                       backend=backend, prec=prec)


def uniform_state(d: int, backend: str = EXACT, prec: int = DEFAULT_PRECISION) -> StateVector:
    """|1> = (1/sqrt d) sum_u |q_u>."""
    if backend == EXACT:
        s = Exact.sqrt(Fraction(1, d))
        return StateVector([s] * d, EXACT, prec)
    with mpmath.workprec(prec):
        s = 1 / mpmath.sqrt(d)
    return StateVector([s] * d, BIGFLOAT, prec)
