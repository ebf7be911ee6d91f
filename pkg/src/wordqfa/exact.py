"""Exact arithmetic in multiquadratic extensions of the Gaussian rationals.

An element is stored as a sum of terms (a + b*i) * sqrt(r) / den with
integer a, b, squarefree positive radicand r and a common positive
denominator.  The square roots of distinct squarefree integers are
linearly independent over Q(i), so the normalized form is canonical and
equality is structural.  Q(i, sqrt5) is the subfield spanned by the
radicands 1 and 5.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

import mpmath


@lru_cache(maxsize=4096)
def squarefree_split(n: int) -> tuple[int, int]:
    """Return (s, r) with n = s*s*r and r squarefree."""
    if n <= 0:
        raise ValueError("radicand must be positive")
    s, r = 1, 1
    m = n
    p = 2
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        if e:
            s *= p ** (e // 2)
            if e % 2:
                r *= p
        p += 1
    r *= m
    return s, r


@lru_cache(maxsize=4096)
def _prime_factors(r: int) -> tuple[int, ...]:
    out = []
    p = 2
    while p * p <= r:
        if r % p == 0:
            out.append(p)
            while r % p == 0:
                r //= p
        p += 1
    if r > 1:
        out.append(r)
    return tuple(out)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class Exact:
    __slots__ = ("terms", "den", "_hash")

    def __init__(self, terms=(), den: int = 1, _normalized: bool = False):
        if _normalized:
            self.terms = terms
            self.den = den
        else:
            acc: dict[int, list[int]] = {}
            for r, a, b in terms:
                if a == 0 and b == 0:
                    continue
                slot = acc.setdefault(r, [0, 0])
                slot[0] += a
                slot[1] += b
            self.terms, self.den = _normalize(acc, den)
        self._hash = None

    # constructors -----------------------------------------------------
    @classmethod
    def from_rational(cls, re, im=0) -> "Exact":
        re, im = _to_fraction(re), _to_fraction(im)
        den = re.denominator * im.denominator // gcd(re.denominator, im.denominator)
        a = re.numerator * (den // re.denominator)
        b = im.numerator * (den // im.denominator)
        return cls(((1, a, b),), den)

    @classmethod
    def sqrt(cls, q) -> "Exact":
        """Square root of a non-negative rational."""
        q = _to_fraction(q)
        if q < 0:
            raise ValueError("square root of a negative rational")
        if q == 0:
            return ZERO
        # sqrt(p/d) = sqrt(p*d)/d
        s, r = squarefree_split(q.numerator * q.denominator)
        return cls(((r, s, 0),), q.denominator)

    @classmethod
    def coerce(cls, x) -> "Exact":
        if isinstance(x, Exact):
            return x
        if isinstance(x, (int, Fraction)):
            return cls.from_rational(x)
        if isinstance(x, complex) and x.real == int(x.real) and x.imag == int(x.imag):
            return cls.from_rational(int(x.real), int(x.imag))
        raise TypeError(f"cannot coerce {type(x).__name__} to Exact")

    # predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_real(self) -> bool:
        return all(b == 0 for _, _, b in self.terms)

    def is_rational(self) -> bool:
        return all(r == 1 and b == 0 for r, _, b in self.terms)

    def radicands(self) -> tuple[int, ...]:
        return tuple(r for r, _, _ in self.terms)

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Exact):
            try:
                other = Exact.coerce(other)
            except TypeError:
                return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        d1, d2 = self.den, other.den
        g = gcd(d1, d2)
        f1, f2 = d2 // g, d1 // g
        acc: dict[int, list[int]] = {}
        for r, a, b in self.terms:
            acc[r] = [a * f1, b * f1]
        for r, a, b in other.terms:
            slot = acc.get(r)
            if slot is None:
                acc[r] = [a * f2, b * f2]
            else:
                slot[0] += a * f2
                slot[1] += b * f2
        terms, den = _normalize(acc, d1 * f1)
        return Exact(terms, den, True)

    __radd__ = __add__

    def __neg__(self):
        return Exact(tuple((r, -a, -b) for r, a, b in self.terms), self.den, True)

    def __sub__(self, other):
        if not isinstance(other, Exact):
            try:
                other = Exact.coerce(other)
            except TypeError:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Exact):
            try:
                other = Exact.coerce(other)
            except TypeError:
                return NotImplemented
        if not self.terms or not other.terms:
            return ZERO
        acc: dict[int, list[int]] = {}
        for r1, a1, b1 in self.terms:
            for r2, a2, b2 in other.terms:
                re = a1 * a2 - b1 * b2
                im = a1 * b2 + b1 * a2
                if r1 == 1:
                    r = r2
                elif r2 == 1:
                    r = r1
                else:
                    g = gcd(r1, r2)
                    r = (r1 // g) * (r2 // g)
                    re *= g
                    im *= g
                slot = acc.get(r)
                if slot is None:
                    acc[r] = [re, im]
                else:
                    slot[0] += re
                    slot[1] += im
        terms, den = _normalize(acc, self.den * other.den)
        return Exact(terms, den, True)

    __rmul__ = __mul__

    def conjugate(self) -> "Exact":
        return Exact(tuple((r, a, -b) for r, a, b in self.terms), self.den, True)

    def abs2(self) -> "Exact":
        return self * self.conjugate()

    def _flip(self, p: int) -> "Exact":
        return Exact(tuple((r, -a, -b) if r % p == 0 else (r, a, b)
                           for r, a, b in self.terms), self.den, True)

    def inverse(self) -> "Exact":
        if not self.terms:
            raise ZeroDivisionError("inverse of zero")
        num = ONE
        y = self
        while True:
            primes = sorted({p for r in y.radicands() for p in _prime_factors(r)})
            if not primes:
                break
            c = y._flip(primes[-1])
            num = num * c
            y = y * c
        # y is a Gaussian rational (a + b i)/den
        (_, a, b), = y.terms
        n2 = a * a + b * b
        inv = Exact(((1, a * y.den, -b * y.den),), n2)
        return num * inv

    def __truediv__(self, other):
        if not isinstance(other, Exact):
            try:
                other = Exact.coerce(other)
            except TypeError:
                return NotImplemented
        if other.is_rational():
            (_, a, _), = other.terms
            if a == 0:
                raise ZeroDivisionError
            return self * Exact(((1, other.den, 0),), a)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return Exact.coerce(other) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # comparison -------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Exact):
            try:
                other = Exact.coerce(other)
            except TypeError:
                return NotImplemented
        return self.den == other.den and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.terms, self.den))
        return self._hash

    def sign(self) -> int:
        """Sign of a real element, decided numerically with growing precision."""
        if not self.is_real():
            raise ValueError("sign of a non-real number")
        if not self.terms:
            return 0
        if self.is_rational():
            return 1 if self.terms[0][1] > 0 else -1
        prec = 128
        while True:
            v = self.to_mpc(prec).real
            ctx = mpmath.mp
            with ctx.workprec(prec):
                if abs(v) > mpmath.mpf(2) ** (-(prec // 2)):
                    return 1 if v > 0 else -1
            prec *= 2
            if prec > 1 << 16:
                raise ArithmeticError("could not decide the sign")

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    # conversion -------------------------------------------------------
    def to_mpc(self, prec: int = 256):
        with mpmath.mp.workprec(prec + 16):
            re = mpmath.mpf(0)
            im = mpmath.mpf(0)
            for r, a, b in self.terms:
                s = mpmath.sqrt(r) if r != 1 else mpmath.mpf(1)
                re += a * s
                im += b * s
            d = mpmath.mpf(self.den)
            value = mpmath.mpc(re / d, im / d)
        with mpmath.mp.workprec(prec):
            # drop the guard bits so serialized values round-trip exactly
            return +value

    def __complex__(self):
        v = self.to_mpc(64)
        return complex(float(v.real), float(v.imag))

    def __float__(self):
        if not self.is_real():
            raise TypeError("complex value")
        return float(self.to_mpc(64).real)

    def rational_value(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("not rational")
        if not self.terms:
            return Fraction(0)
        return Fraction(self.terms[0][1], self.den)

    def to_json(self):
        return [[r, str(Fraction(a, self.den)), str(Fraction(b, self.den))]
                for r, a, b in self.terms]

    @classmethod
    def from_json(cls, data) -> "Exact":
        out = ZERO
        for r, re, im in data:
            out = out + cls.from_rational(Fraction(re), Fraction(im)) * cls.sqrt(int(r))
        return out

    def __repr__(self):
        if not self.terms:
            return "Exact(0)"
        parts = []
        for r, a, b in self.terms:
            c = f"({Fraction(a, self.den)}{'+' if b >= 0 else '-'}{abs(Fraction(b, self.den))}i)"
            parts.append(c if r == 1 else f"{c}*sqrt({r})")
        return "Exact(" + " + ".join(parts) + ")"


def _normalize(acc: dict, den: int):
    items = [(r, a, b) for r, (a, b) in acc.items() if a or b]
    if not items:
        return (), 1
    g = den
    for _, a, b in items:
        g = gcd(g, gcd(a, b))
        if g == 1:
            break
    if g != 1:
        items = [(r, a // g, b // g) for r, a, b in items]
        den //= g
    items.sort()
    return tuple(items), den


ZERO = Exact((), 1, True)
ONE = Exact(((1, 1, 0),), 1, True)
I_UNIT = Exact(((1, 0, 1),), 1, True)


# cos and sin of k*15 degrees, k = 0..6, as exact elements
def _cos15_table():
    q = Fraction
    s2, s3, s6 = Exact.sqrt(2), Exact.sqrt(3), Exact.sqrt(6)
    return [
        ONE,
        (s6 + s2) * Exact.from_rational(q(1, 4)),
        s3 * Exact.from_rational(q(1, 2)),
        s2 * Exact.from_rational(q(1, 2)),
        Exact.from_rational(q(1, 2)),
        (s6 - s2) * Exact.from_rational(q(1, 4)),
        ZERO,
    ]


_COS15 = None


def exact_cos_sin_24(k: int) -> tuple[Exact, Exact]:
    """(cos, sin) of 2*pi*k/24."""
    global _COS15
    if _COS15 is None:
        _COS15 = _cos15_table()
    k %= 24
    quadrant, j = divmod(k, 6)
    c, s = _COS15[j], _COS15[6 - j]
    for _ in range(quadrant):
        c, s = -s, c
    return c, s


def exact_root_of_unity(k: int, m: int) -> Exact:
    """exp(2*pi*i*k/m) for m dividing 24; raises ValueError otherwise."""
    if m <= 0 or 24 % m:
        raise ValueError(f"exp(2 pi i/{m}) is outside the exact field")
    c, s = exact_cos_sin_24(k * (24 // m))
    return c + s * I_UNIT

