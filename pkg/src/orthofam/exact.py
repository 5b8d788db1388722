"""Exact scalars: rationals and finite sums of square roots of rationals.

Every entry of every family in this package is a ``Radical`` (``q*sqrt(r)``
with ``r`` square-free), and every inner product is a ``RadicalSum``.  Since
square roots of distinct square-free integers are linearly independent over
the rationals, a ``RadicalSum`` is zero exactly when its term map is empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, isqrt
from typing import Iterable, Mapping, Union

BigRat = Fraction

#: Cofactors left over after small-prime stripping must stay below this.
FACTOR_CAP = 10**12
_SMALL_PRIME_BOUND = 10**6

Number = Union[int, Fraction]


class FactorizationLimit(ArithmeticError):
    """Raised when a radicand cannot be certified square-free under the cap."""


def as_rat(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact rational: {value!r}")


def half_power_below(bound, strict: bool = True, cap: Fraction = Fraction(1, 2)) -> Fraction:
    """Largest ``2**-e <= cap`` with ``2**-e < bound`` (or ``<=`` when not strict)."""
    bound = as_rat(bound)
    if bound <= 0:
        raise ValueError("no positive value fits below a nonpositive bound")
    t = Fraction(cap)
    while (t >= bound) if strict else (t > bound):
        t /= 2
    return t


def _is_square(n: int) -> bool:
    r = isqrt(n)
    return r * r == n


@lru_cache(maxsize=4096)
def square_free_split(n: int) -> tuple[int, int]:
    """Return ``(root, core)`` with ``n == root**2 * core`` and ``core`` square-free."""
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 0, 1
    root, core = 1, 1
    rest = n
    # powers of two separately, they dominate every construction here
    tz = (rest & -rest).bit_length() - 1
    rest >>= tz
    root <<= tz // 2
    if tz % 2:
        core *= 2
    p = 3
    if rest > 1 and _is_square(rest):
        root *= isqrt(rest)
        rest = 1
    while rest > 1 and p <= _SMALL_PRIME_BOUND and p * p <= rest:
        if rest % p == 0:
            e = 0
            while rest % p == 0:
                rest //= p
                e += 1
            root *= p ** (e // 2)
            if e % 2:
                core *= p
            if rest > 1 and _is_square(rest):
                root *= isqrt(rest)
                rest = 1
                break
        p += 2
    if rest > 1:
        if _is_square(rest):
            root *= isqrt(rest)
        elif p * p > rest or rest <= FACTOR_CAP:
            # no prime factor <= p remains, so rest is prime (or a product of
            # primes above the bound that cannot repeat below the cap)
            core *= rest
        else:
            raise FactorizationLimit(
                f"cofactor {rest} exceeds the square-free certification cap"
            )
    return root, core


@dataclass(frozen=True)
class Interval:
    """Closed rational interval ``[lo, hi]``."""

    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, q) -> bool:
        return self.lo <= q <= self.hi

    def excludes_zero(self) -> bool:
        return self.lo > 0 or self.hi < 0

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def scale(self, q: Fraction) -> "Interval":
        a, b = self.lo * q, self.hi * q
        return Interval(min(a, b), max(a, b))


def sqrt_interval(q: Fraction, bits: int) -> Interval:
    """Directed-rounding enclosure of ``sqrt(q)`` with width at most ``2**-bits``."""
    if q < 0:
        raise ValueError("square root of a negative rational")
    scale = 1 << bits
    # floor(sqrt(q) * 2**bits) via integer square root of a floored rational
    lo_int = isqrt((q.numerator * scale * scale) // q.denominator)
    hi_int = lo_int if Fraction(lo_int * lo_int, scale * scale) == q else lo_int + 1
    return Interval(Fraction(lo_int, scale), Fraction(hi_int, scale))


def _iroot_floor(n: int, k: int) -> int:
    if n < 0:
        raise ValueError("negative argument")
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x**k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def rational_power_interval(q: Fraction, p: Fraction, bits: int) -> Interval:
    """Enclose ``q**p`` for ``q >= 0`` and rational ``p > 0``; width ``<= 2**-bits``
    when ``q**p <= 1`` (the caller widens ``bits`` otherwise)."""
    q, p = as_rat(q), as_rat(p)
    if q < 0 or p <= 0:
        raise ValueError("need q >= 0 and p > 0")
    a, c = p.numerator, p.denominator
    base = q**a
    guard = bits + max(0, base.numerator.bit_length() - base.denominator.bit_length()) // c + 2
    scale = 1 << guard
    target_num = base.numerator * scale**c
    lo = _iroot_floor(target_num // base.denominator, c)
    hi = lo if Fraction(lo**c, scale**c) == base else lo + 1
    return Interval(Fraction(lo, scale), Fraction(hi, scale))


@dataclass(frozen=True, order=False)
class Radical:
    """``coeff * sqrt(radicand)`` in canonical form."""

    coeff: Fraction
    radicand: int = 1

    def __post_init__(self):
        if not isinstance(self.coeff, Fraction):
            object.__setattr__(self, "coeff", as_rat(self.coeff))
        if self.radicand < 1:
            raise ValueError("radicand must be a positive square-free integer")
        if self.coeff == 0 and self.radicand != 1:
            object.__setattr__(self, "radicand", 1)

    @classmethod
    def of(cls, value) -> "Radical":
        if isinstance(value, Radical):
            return value
        return cls(as_rat(value), 1)

    @property
    def is_rational(self) -> bool:
        return self.radicand == 1

    def rational(self) -> Fraction:
        if self.radicand != 1:
            raise ValueError(f"{self} is irrational")
        return self.coeff

    def square(self) -> Fraction:
        return self.coeff * self.coeff * self.radicand

    def sign(self) -> int:
        return (self.coeff > 0) - (self.coeff < 0)

    def __neg__(self) -> "Radical":
        return Radical(-self.coeff, self.radicand)

    def __abs__(self) -> "Radical":
        return Radical(abs(self.coeff), self.radicand)

    def __mul__(self, other) -> "Radical":
        if not isinstance(other, Radical):
            other = Radical.of(other)
        return radical_mul(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        return RadicalSum.of(self) + other

    __radd__ = __add__

    def __sub__(self, other):
        return RadicalSum.of(self) - other

    def __bool__(self) -> bool:
        return self.coeff != 0

    def __str__(self) -> str:
        if self.radicand == 1:
            return str(self.coeff)
        return f"{self.coeff}*sqrt({self.radicand})"


ZERO = Radical(Fraction(0), 1)
ONE = Radical(Fraction(1), 1)


def normalize_radical(q, r) -> Radical:
    """Canonical ``Radical`` equal to ``q * sqrt(r)`` for rational ``r >= 0``.

    >>> normalize_radical(1, 8)
    Radical(coeff=Fraction(2, 1), radicand=2)
    """
    q, r = as_rat(q), as_rat(r)
    if r < 0:
        raise ValueError("negative radicand")
    if q == 0 or r == 0:
        return ZERO
    # q*sqrt(a/b) = (q/b)*sqrt(a*b)
    a, b = r.numerator, r.denominator
    root, core = square_free_split(a * b)
    return Radical(q * root / b, core)


def radical_mul(a: Radical, b: Radical) -> Radical:
    if a.coeff == 0 or b.coeff == 0:
        return ZERO
    g = gcd(a.radicand, b.radicand)
    return Radical(a.coeff * b.coeff * g, (a.radicand // g) * (b.radicand // g))


def radical_sign(a: Radical) -> int:
    return a.sign()


class RadicalSum:
    """Finite sum ``sum(c_r * sqrt(r))`` over distinct square-free ``r``.

    Immutable; zero coefficients are never stored.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[int, Fraction] | None = None):
        clean = {}
        if terms:
            for r, c in terms.items():
                c = as_rat(c)
                if c != 0:
                    clean[int(r)] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def of(cls, value) -> "RadicalSum":
        if isinstance(value, RadicalSum):
            return value
        rad = Radical.of(value)
        return cls({rad.radicand: rad.coeff})

    @classmethod
    def total(cls, values: Iterable) -> "RadicalSum":
        acc: dict[int, Fraction] = {}
        for v in values:
            if isinstance(v, RadicalSum):
                items = v._terms.items()
            else:
                v = Radical.of(v)
                items = ((v.radicand, v.coeff),)
            for r, c in items:
                acc[r] = acc.get(r, 0) + c
        return cls(acc)

    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return set(self._terms) <= {1}

    def rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self._terms.get(1, Fraction(0))

    def __add__(self, other) -> "RadicalSum":
        other = RadicalSum.of(other)
        acc = dict(self._terms)
        for r, c in other._terms.items():
            acc[r] = acc.get(r, 0) + c
        return RadicalSum(acc)

    __radd__ = __add__

    def __neg__(self) -> "RadicalSum":
        return RadicalSum({r: -c for r, c in self._terms.items()})

    def __sub__(self, other) -> "RadicalSum":
        return self + (-RadicalSum.of(other))

    def __rsub__(self, other) -> "RadicalSum":
        return RadicalSum.of(other) - self

    def __mul__(self, other) -> "RadicalSum":
        other = RadicalSum.of(other)
        acc: dict[int, Fraction] = {}
        for r1, c1 in self._terms.items():
            for r2, c2 in other._terms.items():
                g = gcd(r1, r2)
                r = (r1 // g) * (r2 // g)
                acc[r] = acc.get(r, 0) + c1 * c2 * g
        return RadicalSum(acc)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, Radical)):
            other = RadicalSum.of(other)
        if not isinstance(other, RadicalSum):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        return f"RadicalSum({self.items()!r})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = [str(Radical(c, r)) for r, c in self.items()]
        return " + ".join(parts)

    def sign(self) -> int:
        return sum_sign(self)

    def __abs__(self) -> "RadicalSum":
        return -self if self.sign() < 0 else self


def sum_add(s: RadicalSum, t: Radical) -> RadicalSum:
    return s + t


def sum_is_zero(s: RadicalSum) -> bool:
    return s.is_zero()


def approx(v, bits: int) -> Interval:
    """Rational interval of width ``<= 2**-bits`` containing ``v``."""
    if bits < 1:
        raise ValueError("bits must be positive")
    s = RadicalSum.of(v)
    terms = s.items()
    if not terms:
        return Interval(Fraction(0), Fraction(0))
    lo = hi = Fraction(0)
    weight = sum(abs(c) for r, c in terms if r != 1)
    extra = max(0, weight.numerator.bit_length() - weight.denominator.bit_length() + 1) if weight else 0
    inner_bits = bits + extra + len(terms).bit_length() + 1
    for r, c in terms:
        if r == 1:
            lo += c
            hi += c
            continue
        box = sqrt_interval(Fraction(r), inner_bits).scale(c)
        lo += box.lo
        hi += box.hi
    return Interval(lo, hi)


def sum_sign(s: RadicalSum, start_bits: int = 32) -> int:
    """Exact sign, refining ``approx`` until the enclosure excludes zero."""
    if s.is_zero():
        return 0
    if s.is_rational():
        c = s.rational()
        return (c > 0) - (c < 0)
    signs = {(c > 0) - (c < 0) for c in s.terms.values()}
    if len(signs) == 1:
        return signs.pop()
    bits = start_bits
    while True:
        box = approx(s, bits)
        if box.lo > 0:
            return 1
        if box.hi < 0:
            return -1
        bits *= 2


def compare(a, b) -> int:
    return sum_sign(RadicalSum.of(a) - RadicalSum.of(b))


def abs_compare(a, b) -> int:
    """Compare ``|a|`` with ``|b|``."""
    a, b = RadicalSum.of(a), RadicalSum.of(b)
    return compare(abs(a), abs(b))


# -- exact string encoding ---------------------------------------------------

def encode_rat(q) -> dict:
    q = as_rat(q)
    return {"num": str(q.numerator), "den": str(q.denominator)}


def decode_rat(obj) -> Fraction:
    if isinstance(obj, str):
        return Fraction(obj)
    if isinstance(obj, int):
        return Fraction(obj)
    if "radicand" in obj and int(obj["radicand"]) != 1:
        raise ValueError(f"expected a rational, got radicand {obj['radicand']}")
    return Fraction(int(obj["num"]), int(obj["den"]))


def encode_radical(v) -> dict:
    v = Radical.of(v)
    return {
        "num": str(v.coeff.numerator),
        "den": str(v.coeff.denominator),
        "radicand": str(v.radicand),
    }


def decode_radical(obj) -> Radical:
    if isinstance(obj, (str, int)):
        return Radical.of(Fraction(obj))
    den = int(obj["den"])
    if den <= 0:
        raise ValueError("denominator must be positive")
    rad = int(obj.get("radicand", "1"))
    value = Radical(Fraction(int(obj["num"]), den), rad)
    root, core = square_free_split(rad)
    if root != 1:
        raise ValueError(f"radicand {rad} is not square-free")
    return value


def encode_sum(s) -> list:
    return [encode_radical(Radical(c, r)) for r, c in RadicalSum.of(s).items()]


def decode_sum(items) -> RadicalSum:
    return RadicalSum.total(decode_radical(x) for x in items)
