"""Finite prefixes, infinite sequence handles and certified inner products."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .exact import (
    Interval,
    Radical,
    RadicalSum,
    ZERO,
    as_rat,
    rational_power_interval,
    sqrt_interval,
)


class Unverifiable(Exception):
    """The metadata needed to certify a result was not supplied."""


class OutOfRange(IndexError):
    pass


# -- prefixes -----------------------------------------------------------------

@dataclass(frozen=True)
class PrefixVec:
    entries: tuple[Radical, ...]

    @classmethod
    def of(cls, values: Iterable) -> "PrefixVec":
        return cls(tuple(Radical.of(v) for v in values))

    @property
    def length(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return PrefixVec(self.entries[i])
        return self.entries[i]

    def extend(self, *values) -> "PrefixVec":
        return PrefixVec(self.entries + tuple(Radical.of(v) for v in values))

    def dot(self, other: Iterable) -> RadicalSum:
        return RadicalSum.total(a * Radical.of(b) for a, b in zip(self.entries, other))

    def norm_sq(self) -> Fraction:
        return sum((e.square() for e in self.entries), Fraction(0))

    def is_rational(self) -> bool:
        return all(e.is_rational for e in self.entries)

    def rationals(self) -> list[Fraction]:
        return [e.rational() for e in self.entries]

    def support(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.coeff != 0]

    def __str__(self) -> str:
        return "(" + ", ".join(str(e) for e in self.entries) + ")"


# -- support descriptors --------------------------------------------------------

@dataclass(frozen=True)
class FiniteSupport:
    indices: frozenset

    @property
    def end(self) -> int:
        return max(self.indices) + 1 if self.indices else 0


@dataclass(frozen=True)
class FullSupport:
    pass


@dataclass(frozen=True)
class BlockSupport:
    """Support given level by level as half-open index ranges."""

    ranges: Callable[[int], list[tuple[int, int]]] = field(compare=False)

    def level(self, n: int) -> list[tuple[int, int]]:
        return self.ranges(n)


Support = Union[FiniteSupport, FullSupport, BlockSupport]


@dataclass(frozen=True)
class PairInfo:
    """What is known about a pair of sequences.

    ``disjoint_beyond=N``: at every index ``m >= N`` at most one of the two is
    nonzero.  ``modulus(eps)`` returns ``N`` such that every block sum
    ``sum_{N' <= n < m} x(n) y(n)`` with ``N <= N' < m`` is below ``eps``.
    """

    disjoint_beyond: Optional[int] = None
    modulus: Optional[Callable[[Fraction], int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class SeqHandle:
    name: str
    rule: Callable[[int], Radical] = field(compare=False)
    support: Support = FullSupport()
    pairs: Mapping[str, PairInfo] = field(default_factory=dict, compare=False)
    pair_rule: Optional[Callable[["SeqHandle", "SeqHandle"], Optional[PairInfo]]] = field(
        default=None, compare=False
    )
    # divergence(start, bound) -> minimal end with sum_{start<=n<end} x(n)^2 > bound
    divergence: Optional[Callable[[int, Fraction], int]] = field(default=None, compare=False)
    in_l2: Optional[bool] = None
    lp_tail: Optional[Callable[[Fraction, int], Optional[Fraction]]] = field(default=None, compare=False)
    length: Optional[int] = None
    meta: Mapping = field(default_factory=dict, compare=False)

    def __call__(self, n: int) -> Radical:
        if n < 0 or (self.length is not None and n >= self.length):
            raise OutOfRange(f"{self.name}: index {n} outside the defined range")
        if isinstance(self.support, FiniteSupport) and n not in self.support.indices:
            return ZERO
        return Radical.of(self.rule(n))

    def rational(self, n: int) -> Fraction:
        return self(n).rational()

    def prefix(self, upto: int) -> PrefixVec:
        return PrefixVec(tuple(self(n) for n in range(upto)))

    def with_pair(self, partner: str, info: PairInfo) -> "SeqHandle":
        pairs = dict(self.pairs)
        pairs[partner] = info
        return dataclasses.replace(self, pairs=pairs)

    def pair_info(self, other: "SeqHandle") -> Optional[PairInfo]:
        if other.name in self.pairs:
            return self.pairs[other.name]
        if self.name in other.pairs:
            return other.pairs[self.name]
        for a, b in ((self, other), (other, self)):
            if a.pair_rule is not None:
                info = a.pair_rule(a, b)
                if info is not None:
                    return info
        return None


def finite_handle(name: str, values: Sequence, length: Optional[int] = None) -> SeqHandle:
    """Handle for a finitely supported sequence with the given prefix."""
    vals = [Radical.of(v) for v in values]
    support = frozenset(i for i, v in enumerate(vals) if v.coeff != 0)

    def rule(n: int) -> Radical:
        return vals[n] if n < len(vals) else ZERO

    return SeqHandle(name, rule, FiniteSupport(support), in_l2=True, length=length)


# -- certificates ---------------------------------------------------------------

@dataclass
class InnerCertificate:
    kind: str  # "exact" | "partial" | "divergent"
    value: Optional[RadicalSum] = None
    stable_from: Optional[int] = None
    sums: list = field(default_factory=list)
    tail_bound: Optional[Fraction] = None
    witness: Optional[Callable[[Fraction], int]] = None
    witness_samples: list = field(default_factory=list)

    @property
    def is_exact_zero(self) -> bool:
        return self.kind == "exact" and self.value is not None and self.value.is_zero()


def inner_partial(x: SeqHandle, y: SeqHandle, upto: int) -> RadicalSum:
    """Exact ``sum_{n < upto} x(n) y(n)``."""
    if isinstance(x.support, FiniteSupport) or isinstance(y.support, FiniteSupport):
        idx: Iterable[int]
        if isinstance(x.support, FiniteSupport) and isinstance(y.support, FiniteSupport):
            idx = x.support.indices & y.support.indices
        elif isinstance(x.support, FiniteSupport):
            idx = x.support.indices
        else:
            idx = y.support.indices
        return RadicalSum.total(x(n) * y(n) for n in sorted(idx) if n < upto)
    return RadicalSum.total(x(n) * y(n) for n in range(upto))


def _divergent(x: SeqHandle, samples=(Fraction(1), Fraction(10), Fraction(100))) -> InnerCertificate:
    def witness(bound: Fraction) -> int:
        return x.divergence(0, as_rat(bound))

    return InnerCertificate(
        "divergent",
        witness=witness,
        witness_samples=[(b, witness(b)) for b in samples],
    )


def inner_certified(x: SeqHandle, y: SeqHandle, precision: Fraction = Fraction(1, 2**20)) -> InnerCertificate:
    """Certify ``(x, y)`` from support descriptors or pair metadata."""
    if x.name == y.name:
        if x.divergence is not None:
            return _divergent(x)
        if isinstance(x.support, FiniteSupport):
            end = x.support.end
            return InnerCertificate("exact", inner_partial(x, y, end), end)
        raise Unverifiable(f"self inner product of {x.name} needs a divergence witness")
    finite = [h.support.end for h in (x, y) if isinstance(h.support, FiniteSupport)]
    if finite:
        end = min(finite)
        return InnerCertificate("exact", inner_partial(x, y, end), end)
    info = x.pair_info(y)
    if info is None:
        raise Unverifiable(f"no pair metadata for ({x.name}, {y.name}); supply a modulus")
    if info.disjoint_beyond is not None:
        n = info.disjoint_beyond
        return InnerCertificate("exact", inner_partial(x, y, n), n)
    if info.modulus is not None:
        n = info.modulus(as_rat(precision))
        value = inner_partial(x, y, n)
        return InnerCertificate("partial", sums=[(n, value)], tail_bound=as_rat(precision))
    raise Unverifiable(f"pair metadata for ({x.name}, {y.name}) carries no certificate")


def check_disjoint_beyond(x: SeqHandle, y: SeqHandle, start: int, stop: int) -> bool:
    """Spot-check the disjoint-beyond promise on ``[start, stop)``."""
    return all(x(m).coeff == 0 or y(m).coeff == 0 for m in range(start, stop))


# -- l_p reporting ----------------------------------------------------------------

def abs_power(v: Radical, p: Fraction, bits: int = 64) -> Interval:
    """Enclosure of ``|v|**p``; a degenerate interval whenever it is rational."""
    p = as_rat(p)
    sq = v.square()
    if p.denominator == 1 and p.numerator % 2 == 0:
        val = sq ** (p.numerator // 2)
        return Interval(val, val)
    if p.denominator == 1 and v.is_rational:
        val = abs(v.coeff) ** p.numerator
        return Interval(val, val)
    if sq == 0:
        return Interval(Fraction(0), Fraction(0))
    return rational_power_interval(sq, p / 2, bits)


def lp_report(x: SeqHandle, p, upto: int, bits: int = 64) -> tuple[Interval, Optional[Fraction]]:
    """Enclose ``sum_{n < upto} |x(n)|**p`` and attach the family's tail bound."""
    p = as_rat(p)
    if p <= 0:
        raise ValueError("p must be positive")
    total = Interval(Fraction(0), Fraction(0))
    indices = range(upto)
    if isinstance(x.support, FiniteSupport):
        indices = sorted(n for n in x.support.indices if n < upto)
    for n in indices:
        total = total + abs_power(x(n), p, bits)
    tail = x.lp_tail(p, upto) if x.lp_tail is not None else None
    return total, tail


def min_abs_seq(x: SeqHandle, y: SeqHandle, upto: int) -> PrefixVec:
    """Pointwise ``min(|x(n)|, |y(n)|)`` for ``n < upto``."""
    out = []
    for n in range(upto):
        a, b = abs(x(n)), abs(y(n))
        out.append(a if a.square() <= b.square() else b)
    return PrefixVec(tuple(out))


def strongly_orthogonal(x: SeqHandle, y: SeqHandle) -> tuple[bool, dict]:
    """Almost disjoint supports and exact zero inner product."""
    evidence: dict = {}
    if x.name == y.name:
        if isinstance(x.support, FiniteSupport) and not x.support.indices:
            return True, {"reason": "zero sequence"}
        evidence["reason"] = "identical nonzero sequences share their support"
        return False, evidence
    finite = [h for h in (x, y) if isinstance(h.support, FiniteSupport)]
    info = x.pair_info(y)
    if finite:
        evidence["support"] = f"finite support of {finite[0].name}"
    elif info is not None and info.disjoint_beyond is not None:
        evidence["support"] = f"intersection inside [0, {info.disjoint_beyond})"
    else:
        raise Unverifiable(f"cannot decide support intersection of {x.name} and {y.name}")
    cert = inner_certified(x, y)
    evidence["certificate"] = cert
    return cert.is_exact_zero, evidence


def sqrt_bounds(q: Fraction, bits: int = 64) -> Interval:
    return sqrt_interval(as_rat(q), bits)
