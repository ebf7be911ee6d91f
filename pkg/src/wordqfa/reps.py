"""Unitary and projective representations, characters and the standard combinators."""

from __future__ import annotations

from typing import Sequence

import mpmath

from .exact import Exact
from .groups import (CosetTable, GroupPresentation, coset_rewrite, validate_coset_table,
                     virtual_overgroup)
from .linalg import (BIGFLOAT, DEFAULT_PRECISION, DEFAULT_TOLERANCE, EXACT, Matrix,
                     ToleranceProfile, _zero, block_diagonal, join_class, mat_mul)

_CACHE_LIMIT = 200_000


class UnitaryRep:
    """Generator images of a representation; inverse generators act by the adjoint."""

    def __init__(self, group: GroupPresentation, images: Sequence[Matrix], projective: bool = False,
                 factorizations=None, label: str = "", check: bool = True,
                 dim: int | None = None, backend: str = EXACT):
        images = tuple(images)
        if len(images) != group.generator_count:
            raise ValueError("one image per generator is required")
        dims = {m.dim for m in images}
        if len(dims) > 1:
            raise ValueError("images must share a dimension")
        if any(m.backend == BIGFLOAT for m in images):
            prec = max(m.prec for m in images)
            images = tuple(m.to_bigfloat(prec) for m in images)
        self.group = group
        self.images = images
        self.dim = images[0].dim if images else (dim or 1)
        if dim is not None and dim != self.dim:
            raise ValueError("declared dimension does not match the images")
        self.projective = projective
        self.factorizations = None if factorizations is None else tuple(
            tuple(f) for f in factorizations)
        self.label = label
        self.backend = images[0].backend if images else backend
        self.prec = max((m.prec for m in images), default=DEFAULT_PRECISION)
        self.amplitude_class = join_class(*(m.amplitude_class for m in images))
        self._inverses = tuple(m.dagger() for m in images)
        self._identity = Matrix.identity(self.dim, self.backend, self.prec)
        self._cache: dict = {}
        if check:
            for m in images:
                if not m.is_unitary():
                    raise ValueError("representation images must be unitary")
            if self.factorizations is not None:
                for m, parts in zip(images, self.factorizations):
                    prod = parts[0]
                    for p in parts[1:]:
                        prod = prod @ p
                    if not prod.equals(m):
                        raise ValueError("factorization does not reproduce the image")

    def symbol_image(self, code: int) -> Matrix:
        if code == 0 or abs(code) > len(self.images):
            raise ValueError(f"symbol {code} is not in the alphabet")
        return self.images[code - 1] if code > 0 else self._inverses[-code - 1]

    def __eq__(self, other):
        if not isinstance(other, UnitaryRep):
            return NotImplemented
        return (self.group == other.group and self.images == other.images
                and self.projective == other.projective)

    def __hash__(self):
        return hash((self.group, self.images))

    def __repr__(self):
        return f"UnitaryRep({self.label or self.group.name}, dim={self.dim})"

    def to_json(self) -> dict:
        out = {"group": self.group.to_json(), "dim": self.dim, "backend": self.backend,
               "projective": self.projective,
               "label": self.label, "images": [m.to_json() for m in self.images]}
        if self.factorizations is not None:
            out["factorizations"] = [[m.to_json() for m in f] for f in self.factorizations]
        return out

    @classmethod
    def from_json(cls, data: dict, group: GroupPresentation | None = None) -> "UnitaryRep":
        if group is None:
            group = GroupPresentation.from_json(data["group"])
        facts = data.get("factorizations")
        if facts is not None:
            facts = [[Matrix.from_json(m) for m in f] for f in facts]
        return cls(group, [Matrix.from_json(m) for m in data["images"]],
                   bool(data.get("projective", False)), facts, data.get("label", ""),
                   dim=int(data["dim"]), backend=data.get("backend", EXACT))


def eval_rep(rep: UnitaryRep, w: Sequence[int]) -> Matrix:
    """rho(w_1) rho(w_2) ... rho(w_n), memoized on prefixes."""
    w = tuple(w)
    cache = rep._cache
    hit = cache.get(w)
    if hit is not None:
        return hit
    # find the longest cached prefix, then extend
    k = len(w)
    while k > 0 and w[:k] not in cache:
        k -= 1
    acc = cache[w[:k]] if k else rep._identity
    if len(cache) > _CACHE_LIMIT:
        cache.clear()
    for i in range(k, len(w)):
        acc = mat_mul(acc, rep.symbol_image(w[i]))
        cache[w[:i + 1]] = acc
    return acc


def eval_rep_uncached(rep: UnitaryRep, w: Sequence[int]) -> Matrix:
    acc = rep._identity
    for c in w:
        acc = mat_mul(acc, rep.symbol_image(c))
    return acc


def character(rep: UnitaryRep, w: Sequence[int]):
    return eval_rep(rep, w).trace()


def character_abs2(rep: UnitaryRep, w: Sequence[int]):
    """|chi|^2, exact on the exact backend."""
    t = character(rep, w)
    if isinstance(t, Exact):
        return t.abs2()
    with mpmath.workprec(rep.prec):
        return t.real * t.real + t.imag * t.imag


def character_magnitude(rep: UnitaryRep, w: Sequence[int]):
    a2 = character_abs2(rep, w)
    with mpmath.workprec(rep.prec):
        if isinstance(a2, Exact):
            return mpmath.sqrt(a2.to_mpc(rep.prec).real)
        return mpmath.sqrt(a2)


def character_gap(rep: UnitaryRep, w: Sequence[int]):
    """d - |chi(w)| as (exactly_zero, mpf value).

    On the exact backend the sign is decided on d^2 - |chi|^2 exactly and the
    value is formed as (d^2 - |chi|^2)/(d + |chi|) to avoid cancellation."""
    d = rep.dim
    a2 = character_abs2(rep, w)
    with mpmath.workprec(rep.prec):
        if isinstance(a2, Exact):
            num = Exact.from_rational(d * d) - a2
            if num.is_zero():
                return True, mpmath.mpf(0)
            numf = num.to_mpc(rep.prec).real
            return False, numf / (d + mpmath.sqrt(a2.to_mpc(rep.prec).real))
        num = d * d - a2
        return False, num / (d + mpmath.sqrt(a2))


def quasikernel_test(rep: UnitaryRep, w: Sequence[int], tol: ToleranceProfile = DEFAULT_TOLERANCE) -> bool:
    zero, gap = character_gap(rep, w)
    if zero:
        return True
    if rep.backend == EXACT:
        return False
    return gap <= tol.eps


def relator_check(rep: UnitaryRep, relator: Sequence[int]) -> bool:
    """Relator maps to I (projective: to a scalar multiple of I)."""
    m = eval_rep_uncached(rep, relator)
    if rep.projective:
        return quasikernel_test(rep, relator)
    return m.equals(Matrix.identity(rep.dim, m.backend, m.prec))


# ---------------------------------------------------------------------------
# combinators


def trivial_rep(group: GroupPresentation, d: int = 1, backend: str = EXACT) -> UnitaryRep:
    eye = Matrix.identity(d, backend)
    return UnitaryRep(group, [eye] * group.generator_count, label=f"1_{d}", check=False,
                      dim=d, backend=backend)


def direct_sum_reps(a: UnitaryRep, b: UnitaryRep) -> UnitaryRep:
    if a.group != b.group:
        raise ValueError("direct sum needs a common group")
    images = [block_diagonal([x, y]) for x, y in zip(a.images, b.images)]
    return UnitaryRep(a.group, images, a.projective or b.projective, None,
                      f"({a.label} + {b.label})", check=False)


def pad_rep(rep: UnitaryRep, d_new: int) -> UnitaryRep:
    if d_new < rep.dim:
        raise ValueError("padding cannot shrink a representation")
    if d_new == rep.dim:
        return rep
    one = trivial_rep(rep.group, d_new - rep.dim, rep.backend)
    out = direct_sum_reps(rep, one)
    out.label = f"pad({rep.label}, {d_new})"
    return out


def restrict_rep(rep: UnitaryRep, subgroup: GroupPresentation,
                 embedding: Sequence[Sequence[int]]) -> UnitaryRep:
    """Image of the i-th subgroup generator is eval_rep(rep, embedding[i])."""
    if len(embedding) != subgroup.generator_count:
        raise ValueError("embedding needs one word per subgroup generator")
    images = [eval_rep_uncached(rep, rep.group.check_word(w)) for w in embedding]
    return UnitaryRep(subgroup, images, rep.projective, None, f"Res({rep.label})", check=False)


def extend_rep(rep: UnitaryRep, group: GroupPresentation, offset: int) -> UnitaryRep:
    """Extend a representation of one direct factor to the product by sending the
    generators outside [offset, offset + rank) to the identity."""
    eye = Matrix.identity(rep.dim, rep.backend, rep.prec)
    images = [eye] * group.generator_count
    for i, m in enumerate(rep.images):
        images[offset + i] = m
    facts = None
    if rep.factorizations is not None:
        facts = [[eye] for _ in range(group.generator_count)]
        for i, f in enumerate(rep.factorizations):
            facts[offset + i] = list(f)
    return UnitaryRep(group, images, rep.projective, facts, rep.label, check=False)


def induce_rep(rep: UnitaryRep, table: CosetTable) -> UnitaryRep:
    """Block (alpha(sigma, j), j) of the image of sigma is rep(beta_hat(sigma, j))."""
    if table.base != rep.group:
        raise ValueError("coset table base does not match the representation's group")
    validate_coset_table(table)
    overgroup = virtual_overgroup(table.base, table)
    r, m = table.index, rep.dim
    z = _zero(rep.backend)
    images = []
    for g in range(1, len(table.generators) + 1):
        rows = [[z] * (m * r) for _ in range(m * r)]
        for j in range(1, r + 1):
            i = table.alpha[(g, j)]
            block = eval_rep_uncached(rep, table.beta_hat[(g, j)])
            for u in range(m):
                for v in range(m):
                    rows[(i - 1) * m + u][(j - 1) * m + v] = block.rows[u][v]
        images.append(Matrix._raw(tuple(tuple(row) for row in rows), rep._identity,
                                  amplitude_class=rep.amplitude_class))
    return UnitaryRep(overgroup, images, rep.projective, None, f"Ind({rep.label})", check=False)


def induced_character_formula(rep: UnitaryRep, table: CosetTable, w: Sequence[int]):
    """sum over cosets t with t^-1 q t in H of chi(t^-1 q t), computed with the
    coset representatives' words and the coset rewriting."""
    total = None
    for j, rep_word in enumerate(table.rep_words, start=1):
        conj = tuple(-c for c in reversed(rep_word)) + tuple(w) + tuple(rep_word)
        coset, rewritten, _ = coset_rewrite(table, conj)
        if coset != 1:
            continue
        chi = character(rep, rewritten)
        total = chi if total is None else total + chi
    return _zero(rep.backend) if total is None else total

