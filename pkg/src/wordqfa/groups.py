"""Group presentations, identity oracles, word metrics, Cayley balls and coset tables.

A word is a tuple of nonzero ints: generator i (0-based) is written i+1 and
its inverse -(i+1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

Word = tuple  # tuple[int, ...]

BALL_CAP = 2_000_000
DEFAULT_BFS_RADIUS = 10


class RadiusExceeded(RuntimeError):
    pass


class CapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorSymbol:
    index: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1) or self.index < 0:
            raise ValueError("invalid generator symbol")

    @property
    def code(self) -> int:
        return self.sign * (self.index + 1)

    @classmethod
    def from_code(cls, code: int) -> "GeneratorSymbol":
        if code == 0:
            raise ValueError("0 is not a generator code")
        return cls(abs(code) - 1, 1 if code > 0 else -1)

    def inverse(self) -> "GeneratorSymbol":
        return GeneratorSymbol(self.index, -self.sign)


def inverse_word(w: Sequence[int]) -> Word:
    return tuple(-c for c in reversed(w))


def symbol_order(code: int) -> int:
    """a < a^-1 < b < b^-1 < ..."""
    return 2 * (abs(code) - 1) + (code < 0)


def word_sort_key(w: Sequence[int]):
    return (len(w), tuple(symbol_order(c) for c in w))


def free_reduce(w: Sequence[int], rank: int | None = None) -> Word:
    out: list[int] = []
    for c in w:
        if c == 0 or (rank is not None and abs(c) > rank):
            raise ValueError(f"symbol {c} out of range for rank {rank}")
        if out and out[-1] == -c:
            out.pop()
        else:
            out.append(c)
    return tuple(out)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class GroupFamily:
    tag: str
    params: tuple = ()
    base: "GroupPresentation | None" = None
    table: "CosetTable | None" = None

    TAGS = ("Trivial", "CyclicFinite", "FreeAbelian", "AbelianMixed", "Free",
            "DirectProductOfFrees", "FreeProductZWithZr", "VirtualOvergroup")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown family {self.tag!r}")
        p = self.params
        if self.tag == "CyclicFinite" and (len(p) != 1 or p[0] < 1):
            raise ValueError("CyclicFinite needs m >= 1")
        if self.tag in ("FreeAbelian", "Free", "FreeProductZWithZr") and (len(p) != 1 or p[0] < 1):
            raise ValueError(f"{self.tag} needs rank >= 1")
        if self.tag == "AbelianMixed":
            r, ms = p[0], p[1:]
            if r < 0 or any(m < 2 for m in ms):
                raise ValueError("AbelianMixed moduli must be >= 2")
            if any(ms[i + 1] % ms[i] for i in range(len(ms) - 1)):
                raise ValueError("AbelianMixed moduli must satisfy m_i | m_(i+1)")
            if r + len(ms) == 0:
                raise ValueError("AbelianMixed needs at least one factor")
        if self.tag == "DirectProductOfFrees" and (not p or any(x < 1 for x in p)):
            raise ValueError("DirectProductOfFrees ranks must be >= 1")
        if self.tag == "VirtualOvergroup" and (self.base is None or self.table is None):
            raise ValueError("VirtualOvergroup needs a base presentation and a coset table")

    @property
    def generator_count(self) -> int:
        t, p = self.tag, self.params
        if t == "Trivial":
            return 0
        if t == "CyclicFinite":
            return 1
        if t in ("FreeAbelian", "Free"):
            return p[0]
        if t == "AbelianMixed":
            return p[0] + len(p) - 1
        if t == "DirectProductOfFrees":
            return sum(p)
        if t == "FreeProductZWithZr":
            return p[0] + 1
        return len(self.table.generators)


def _default_labels(family: GroupFamily) -> tuple[str, ...]:
    n = family.generator_count
    t = family.tag
    if t == "FreeProductZWithZr":
        return tuple(f"x{i + 1}" for i in range(n - 1)) + ("y",)
    if t == "VirtualOvergroup":
        return tuple(family.table.generators)
    if n == 1:
        return ("a",)
    if t == "Free" and n == 2:
        return ("a", "b")
    return tuple(f"a{i + 1}" for i in range(n))


@dataclass(frozen=True)
class GroupPresentation:
    family: GroupFamily
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", _default_labels(self.family))
        if len(self.labels) != self.family.generator_count:
            raise ValueError("label count does not match the family")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate generator labels")
        for lab in self.labels:
            if not lab or lab.startswith("-") or "," in lab or lab.startswith("#"):
                raise ValueError(f"bad generator label {lab!r}")

    @property
    def generator_count(self) -> int:
        return self.family.generator_count

    @property
    def alphabet(self) -> tuple[int, ...]:
        """All symbols in canonical order a, a^-1, b, b^-1, ..."""
        out = []
        for i in range(1, self.generator_count + 1):
            out += [i, -i]
        return tuple(out)

    def check_word(self, w: Sequence[int]) -> Word:
        g = self.generator_count
        w = tuple(w)
        for c in w:
            if not isinstance(c, int) or c == 0 or abs(c) > g:
                raise ValueError(f"symbol {c!r} is not in the alphabet of {self.name}")
        return w

    @property
    def name(self) -> str:
        f = self.family
        if f.tag == "VirtualOvergroup":
            return f"VirtualOvergroup({f.base.name}, {f.table.name})"
        return f"{f.tag}({', '.join(map(str, f.params))})" if f.params else f.tag

    # text words ----------------------------------------------------------
    def parse_word(self, text: str) -> Word:
        text = text.strip()
        if not text:
            return ()
        index = {lab: i + 1 for i, lab in enumerate(self.labels)}
        out = []
        for tok in text.split(","):
            tok = tok.strip()
            sign = 1
            if tok.startswith("-"):
                sign, tok = -1, tok[1:]
            if tok not in index:
                raise ValueError(f"unknown generator {tok!r}")
            out.append(sign * index[tok])
        return tuple(out)

    def format_word(self, w: Sequence[int]) -> str:
        return ",".join(("-" if c < 0 else "") + self.labels[abs(c) - 1] for c in w)

    # JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        out = {"family": self.family.tag, "params": list(self.family.params),
               "labels": list(self.labels)}
        if self.family.tag == "VirtualOvergroup":
            out["base"] = self.family.base.to_json()
            out["coset_table"] = self.family.table.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GroupPresentation":
        tag = data["family"]
        if tag == "VirtualOvergroup":
            base = cls.from_json(data["base"])
            table = CosetTable.from_json(data["coset_table"], base)
            return virtual_overgroup(base, table)
        return cls(GroupFamily(tag, tuple(data["params"])), tuple(data.get("labels", ())))


# convenience constructors


def trivial_group() -> GroupPresentation:
    return GroupPresentation(GroupFamily("Trivial"))


def cyclic_group(m: int, labels=()) -> GroupPresentation:
    return GroupPresentation(GroupFamily("CyclicFinite", (m,)), tuple(labels))


def free_abelian_group(r: int, labels=()) -> GroupPresentation:
    return GroupPresentation(GroupFamily("FreeAbelian", (r,)), tuple(labels))


def abelian_group(r: int, moduli: Sequence[int] = (), labels=()) -> GroupPresentation:
    if not moduli:
        return free_abelian_group(r, labels)
    return GroupPresentation(GroupFamily("AbelianMixed", (r, *moduli)), tuple(labels))


def free_group(r: int, labels=()) -> GroupPresentation:
    return GroupPresentation(GroupFamily("Free", (r,)), tuple(labels))


def direct_product_of_frees(ranks: Sequence[int], labels=()) -> GroupPresentation:
    return GroupPresentation(GroupFamily("DirectProductOfFrees", tuple(ranks)), tuple(labels))


def free_product_z_zr(r: int, labels=()) -> GroupPresentation:
    return GroupPresentation(GroupFamily("FreeProductZWithZr", (r,)), tuple(labels))


def virtual_overgroup(base: GroupPresentation, table: "CosetTable") -> GroupPresentation:
    return GroupPresentation(GroupFamily("VirtualOvergroup", (), base, table),
                             tuple(table.generators))


# ---------------------------------------------------------------------------
# normal forms


def _abelian_shape(p: GroupPresentation) -> tuple[int, tuple[int, ...]]:
    f = p.family
    if f.tag == "CyclicFinite":
        return 0, (f.params[0],)
    if f.tag == "FreeAbelian":
        return f.params[0], ()
    return f.params[0], tuple(f.params[1:])


def _exponents(p: GroupPresentation, w) -> tuple[int, ...]:
    r, ms = _abelian_shape(p)
    counts = [0] * (r + len(ms))
    for c in w:
        counts[abs(c) - 1] += 1 if c > 0 else -1
    for i, m in enumerate(ms):
        counts[r + i] %= m
    return tuple(counts)


def _free_factor_offsets(ranks):
    offs, o = [], 0
    for r in ranks:
        offs.append(o)
        o += r
    return offs


def _dpf_split(p: GroupPresentation, w):
    ranks = p.family.params
    offs = _free_factor_offsets(ranks)
    parts = [[] for _ in ranks]
    for c in w:
        g = abs(c) - 1
        for k in range(len(ranks) - 1, -1, -1):
            if g >= offs[k]:
                parts[k].append(c)
                break
    return tuple(free_reduce(x) for x in parts)


def _free_product_syllables(p: GroupPresentation, w):
    """Alternating syllables of Z^r * Z; A-syllables are exponent vectors over
    x1..xr, B-syllables are ints (powers of y)."""
    r = p.family.params[0]
    stack: list = []
    for c in w:
        g = abs(c) - 1
        e = 1 if c > 0 else -1
        if g < r:
            if stack and stack[-1][0] == "A":
                vec = list(stack[-1][1])
                vec[g] += e
                if any(vec):
                    stack[-1] = ("A", tuple(vec))
                else:
                    stack.pop()
            else:
                vec = [0] * r
                vec[g] = e
                stack.append(("A", tuple(vec)))
        else:
            if stack and stack[-1][0] == "B":
                k = stack[-1][1] + e
                if k:
                    stack[-1] = ("B", k)
                else:
                    stack.pop()
            else:
                stack.append(("B", e))
    return tuple(stack)


def coset_rewrite(table: "CosetTable", w) -> tuple[int, Word, tuple[int, ...]]:
    """Read w right to left from coset 1.

    Returns (final coset, rewritten base word, per-symbol beta-hat lengths in
    tape order), so that phi(w) = g_t * phi(rewritten)."""
    t = 1
    pieces = []
    lengths = []
    for c in reversed(w):
        bh = table.beta_hat[(c, t)]
        pieces.append(bh)
        lengths.append(len(bh))
        t = table.alpha[(c, t)]
    rewritten = tuple(x for piece in reversed(pieces) for x in piece)
    return t, rewritten, tuple(reversed(lengths))


def normal_form(p: GroupPresentation, w) -> object:
    """Hashable canonical key of the element represented by w."""
    tag = p.family.tag
    if tag == "Trivial":
        if w:
            p.check_word(w)
        return ()
    if tag in ("CyclicFinite", "FreeAbelian", "AbelianMixed"):
        return _exponents(p, w)
    if tag == "Free":
        return free_reduce(w)
    if tag == "DirectProductOfFrees":
        return _dpf_split(p, w)
    if tag == "FreeProductZWithZr":
        return _free_product_syllables(p, w)
    base = p.family.base
    t, rewritten, _ = coset_rewrite(p.family.table, w)
    return (t, normal_form(base, rewritten))


def is_identity(p: GroupPresentation, w) -> bool:
    w = p.check_word(w)
    return normal_form(p, w) == normal_form(p, ())


def word_length(p: GroupPresentation, w, radius: int = DEFAULT_BFS_RADIUS) -> int:
    w = p.check_word(w)
    tag = p.family.tag
    if tag == "Trivial":
        return 0
    if tag in ("CyclicFinite", "FreeAbelian", "AbelianMixed"):
        r, ms = _abelian_shape(p)
        e = _exponents(p, w)
        return sum(abs(x) for x in e[:r]) + sum(min(x, m - x) for x, m in zip(e[r:], ms))
    if tag == "Free":
        return len(free_reduce(w))
    if tag == "DirectProductOfFrees":
        return sum(len(x) for x in _dpf_split(p, w))
    if tag == "FreeProductZWithZr":
        return sum(sum(map(abs, s[1])) if s[0] == "A" else abs(s[1])
                   for s in _free_product_syllables(p, w))
    key = normal_form(p, w)
    lengths = _bfs_lengths(p, radius)
    if key not in lengths:
        raise RadiusExceeded(f"element not within BFS radius {radius}")
    return lengths[key]


@lru_cache(maxsize=32)
def _bfs_lengths(p: GroupPresentation, radius: int) -> dict:
    return {key: n for key, (_, n) in _bfs(p, radius, BALL_CAP).items()}


def _bfs(p: GroupPresentation, radius: int, cap: int) -> dict:
    """Shortlex BFS: key -> (lexicographically least geodesic word, length)."""
    seen = {normal_form(p, ()): ((), 0)}
    layer = [()]
    alphabet = p.alphabet
    for n in range(1, radius + 1):
        nxt = []
        for w in layer:
            for c in alphabet:
                if w and w[-1] == -c:
                    continue
                u = w + (c,)
                key = normal_form(p, u)
                if key not in seen:
                    seen[key] = (u, n)
                    nxt.append(u)
                    if len(seen) > cap:
                        raise CapExceeded(f"ball exceeds the cap of {cap} elements")
        if not nxt:
            break
        layer = nxt
    return seen


def enumerate_ball(p: GroupPresentation, n: int, cap: int = BALL_CAP) -> list[tuple[Word, int]]:
    """One shortlex-least geodesic word per element of B(n), sorted shortlex."""
    if n < 0:
        raise ValueError("radius must be non-negative")
    found = _bfs(p, n, cap)
    return sorted(found.values(), key=lambda wl: word_sort_key(wl[0]))


def enumerate_words(p: GroupPresentation, n: int, letters: Sequence[int] | None = None):
    """All words of length exactly n over the given letters (default: full alphabet)."""
    letters = tuple(p.alphabet if letters is None else letters)

    def rec(prefix, k):
        if k == 0:
            yield prefix
            return
        for c in letters:
            yield from rec(prefix + (c,), k - 1)

    yield from rec((), n)


def identity_words(p: GroupPresentation, max_len: int, letters: Sequence[int] | None = None):
    """All identity words of length <= max_len, by depth-first search pruned by
    the word metric (a prefix of length k is kept only if it can still return
    to the identity)."""
    letters = tuple(p.alphabet if letters is None else letters)
    out = []

    def rec(prefix):
        rem = max_len - len(prefix)
        if is_identity(p, prefix):
            out.append(prefix)
        if rem == 0:
            return
        for c in letters:
            u = prefix + (c,)
            if word_length(p, u) <= rem - 1:
                rec(u)

    rec(())
    return out


# ---------------------------------------------------------------------------
# coset tables


@dataclass(frozen=True)
class CosetTable:
    """Left coset data for H <= G of index r.

    ``generators`` labels Sigma_G: the base generators followed by the coset
    representatives g_2..g_r.  ``alpha[(c, j)]`` and ``beta_hat[(c, j)]``
    satisfy c * g_j = g_alpha * phi(beta_hat) with beta_hat a word over H."""

    name: str
    index: int
    generators: tuple[str, ...]
    base: GroupPresentation
    alpha: dict = field(hash=False, compare=False)
    beta_hat: dict = field(hash=False, compare=False)
    rep_words: tuple = ()

    def __hash__(self):
        return hash((self.name, self.index, self.generators, self.base,
                     tuple(sorted(self.alpha.items())),
                     tuple(sorted(self.beta_hat.items()))))

    def __eq__(self, other):
        if not isinstance(other, CosetTable):
            return NotImplemented
        return (self.name, self.index, self.generators, self.base, self.alpha, self.beta_hat) == \
            (other.name, other.index, other.generators, other.base, other.alpha, other.beta_hat)

    @property
    def symbols(self) -> tuple[int, ...]:
        out = []
        for i in range(1, len(self.generators) + 1):
            out += [i, -i]
        return tuple(out)

    @property
    def max_beta_length(self) -> int:
        return max((len(v) for v in self.beta_hat.values()), default=0)

    def to_json(self) -> dict:
        syms = self.symbols
        return {
            "name": self.name,
            "index": self.index,
            "generators": list(self.generators),
            "symbols": list(syms),
            "alpha": [[self.alpha[(c, j)] for j in range(1, self.index + 1)] for c in syms],
            "beta_hat": [[list(self.beta_hat[(c, j)]) for j in range(1, self.index + 1)]
                         for c in syms],
            "rep_words": [list(w) for w in self.rep_words],
        }

    @classmethod
    def from_json(cls, data: dict, base: GroupPresentation) -> "CosetTable":
        syms = [int(c) for c in data["symbols"]]
        r = int(data["index"])
        alpha = {(c, j + 1): int(data["alpha"][i][j]) for i, c in enumerate(syms) for j in range(r)}
        beta = {(c, j + 1): tuple(data["beta_hat"][i][j]) for i, c in enumerate(syms)
                for j in range(r)}
        table = cls(data.get("name", "user"), r, tuple(data["generators"]), base, alpha, beta,
                    tuple(tuple(w) for w in data.get("rep_words", ())))
        validate_coset_table(table)
        return table


class CosetTableError(ValueError):
    pass


def validate_coset_table(table: CosetTable) -> None:
    base = table.base
    r = table.index
    hg = base.generator_count
    if tuple(table.generators[:hg]) != tuple(base.labels):
        raise CosetTableError("overgroup generators must start with the base generators")
    if len(table.generators) - hg != r - 1:
        raise CosetTableError("one extra generator per non-trivial coset representative")
    for c in table.symbols:
        images = []
        for j in range(1, r + 1):
            if (c, j) not in table.alpha or (c, j) not in table.beta_hat:
                raise CosetTableError(f"table is missing the entry for ({c}, {j})")
            a = table.alpha[(c, j)]
            if not 1 <= a <= r:
                raise CosetTableError(f"alpha({c},{j}) = {a} is not a coset index")
            images.append(a)
            try:
                base.check_word(table.beta_hat[(c, j)])
            except ValueError as exc:
                raise CosetTableError(f"beta_hat({c},{j}) is not a base word: {exc}") from None
        if sorted(images) != list(range(1, r + 1)):
            raise CosetTableError(f"alpha({c}, .) is not a permutation")
    for c in table.symbols:
        for j in range(1, r + 1):
            a = table.alpha[(c, j)]
            if table.alpha[(-c, a)] != j:
                raise CosetTableError(f"alpha({-c}, alpha({c},{j})) != {j}")
            loop = table.beta_hat[(-c, a)] + table.beta_hat[(c, j)]
            if not is_identity(base, loop):
                raise CosetTableError(f"beta_hat({-c},{a}) beta_hat({c},{j}) is not trivial in H")
    for c in range(1, hg + 1):
        for s in (c, -c):
            if table.alpha[(s, 1)] != 1 or not is_identity(
                    base, table.beta_hat[(s, 1)] + (-s,)):
                raise CosetTableError("base generators must fix coset 1 with beta_hat = itself")


def build_coset_table(base: GroupPresentation, spec) -> CosetTable:
    """spec: "2Z_in_Z", "Z_in_Dinf", "identity", or a dict in the JSON layout."""
    if isinstance(spec, dict):
        return CosetTable.from_json(spec, base)
    if spec == "identity":
        syms = base.alphabet
        alpha = {(c, 1): 1 for c in syms}
        beta = {(c, 1): (c,) for c in syms}
        table = CosetTable("identity", 1, tuple(base.labels), base, alpha, beta, ((),))
    elif spec in ("2Z_in_Z", "Z_in_Dinf"):
        if base.family.tag != "FreeAbelian" or base.family.params != (1,):
            raise CosetTableError(f"{spec} needs the infinite cyclic group as base")
        h = 1
        x = 2  # the new generator g_2 (a for Z, s for D_inf)
        if spec == "2Z_in_Z":
            # h = a^2; a g1 = g2, a g2 = h, a^-1 g1 = g2 h^-1, a^-1 g2 = 1
            alpha = {(h, 1): 1, (h, 2): 2, (-h, 1): 1, (-h, 2): 2,
                     (x, 1): 2, (x, 2): 1, (-x, 1): 2, (-x, 2): 1}
            beta = {(h, 1): (h,), (h, 2): (h,), (-h, 1): (-h,), (-h, 2): (-h,),
                    (x, 1): (), (x, 2): (h,), (-x, 1): (-h,), (-x, 2): ()}
            labels = (base.labels[0], "a" if base.labels[0] != "a" else "g")
        else:
            # t g2 = t s = s t^-1; s g1 = g2; s g2 = 1; s = s^-1
            alpha = {(h, 1): 1, (h, 2): 2, (-h, 1): 1, (-h, 2): 2,
                     (x, 1): 2, (x, 2): 1, (-x, 1): 2, (-x, 2): 1}
            beta = {(h, 1): (h,), (h, 2): (-h,), (-h, 1): (-h,), (-h, 2): (h,),
                    (x, 1): (), (x, 2): (), (-x, 1): (), (-x, 2): ()}
            labels = (base.labels[0], "s" if base.labels[0] != "s" else "u")
        table = CosetTable(spec, 2, labels, base, alpha, beta, ((), (x,)))
    else:
        raise ValueError(f"unknown embedding spec {spec!r}")
    validate_coset_table(table)
    return table


def direct_product(g: GroupPresentation, h: GroupPresentation) -> GroupPresentation:
    """G x H with G's generators first; only for products that stay inside the
    supported families with that generator order."""
    fg, fh = g.family, h.family
    labels = g.labels + h.labels
    if len(set(labels)) != len(labels):
        labels = ()
    if fg.tag == "Trivial":
        return h
    if fh.tag == "Trivial":
        return g
    free_like = ("Free", "DirectProductOfFrees")
    if fg.tag in free_like and fh.tag in free_like:
        ranks = (fg.params if fg.tag == "DirectProductOfFrees" else fg.params) + \
            (fh.params if fh.tag == "DirectProductOfFrees" else fh.params)
        return direct_product_of_frees(ranks, labels)
    abelian = ("CyclicFinite", "FreeAbelian", "AbelianMixed")
    if fg.tag in abelian and fh.tag in abelian:
        rg, mg = _abelian_shape(g)
        rh, mh = _abelian_shape(h)
        if mg and rh:
            raise ValueError("free abelian factors must precede finite ones")
        moduli = mg + mh
        if any(moduli[i + 1] % moduli[i] for i in range(len(moduli) - 1)):
            raise ValueError("finite moduli must form a divisibility chain")
        return abelian_group(rg + rh, moduli, labels)
    raise ValueError(f"unsupported direct product {g.name} x {h.name}")
