"""Comb families: pairwise orthogonal sequences indexed by infinite 0/1 paths.

A path ``x`` picks, at each level ``n``, its branch node ``x|n`` and the tooth
``x|(n-1) + (1 - x(n-1))``.  Branch blocks carry ``+eps_n`` and tooth blocks
``-eps_n`` where ``eps_n**2 * k_n = r_n``.  Two paths that split at level
``N`` agree on levels ``<= N`` and swap branch and tooth at ``N + 1``, so
their inner product is ``2*(r_0 + ... + r_N) - 2*r_{N+1} = 0``.

Blocks at level 3 already hold ~10**13 indices under the default exponents,
so inner products and norms are computed from per-level aggregates.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

from .exact import (
    Interval,
    Radical,
    RadicalSum,
    ZERO,
    _iroot_floor,
    as_rat,
    normalize_radical,
    rational_power_interval,
)
from .sequences import (
    BlockSupport,
    FullSupport,
    InnerCertificate,
    OutOfRange,
    PairInfo,
    SeqHandle,
)

DEFAULT_INDEX_BUDGET = 10**7


class BlockBudgetExceeded(ValueError):
    def __init__(self, level: int, needed: int, budget: int):
        self.level = level
        super().__init__(
            f"block budget exceeded at level {level}: layout needs {needed} indices, budget {budget}"
        )


def default_exponent(n: int) -> Fraction:
    return 2 + Fraction(1, n + 1)


EXPONENT_RULES: dict[str, Callable[[int], Fraction]] = {
    "default": default_exponent,
    "slow": lambda n: 2 + Fraction(1, 2 * (n + 1)),
}


@lru_cache(maxsize=None)
def comb_r(n: int) -> int:
    """``r_0 = 1`` and ``r_{n+1} = r_0 + ... + r_n``."""
    if n == 0:
        return 1
    return sum(comb_r(i) for i in range(n))


def min_block_size(n: int, p: Fraction) -> int:
    """Least integer ``k > r_n`` with ``k**(p/2 - 1) >= n**2 * r_n**(p/2)``.

    With ``p = a/b`` the condition is ``k**(a - 2b) >= n**(4b) * r**a``.
    """
    p = as_rat(p)
    if p <= 2:
        raise ValueError("exponents must exceed 2")
    a, b = p.numerator, p.denominator
    e = a - 2 * b
    r = comb_r(n)
    target = n ** (4 * b) * r**a
    k = _iroot_floor(target, e)
    if k**e < target:
        k += 1
    return max(k, r + 1)


@dataclass(frozen=True)
class CombParams:
    depth: int  # deepest level laid out
    p: tuple[Fraction, ...]
    r: tuple[int, ...]
    k: tuple[int, ...]
    eps_sq: tuple[Fraction, ...]
    starts: tuple[int, ...]  # starts[n] = first index of level n; starts[depth+1] = total
    rule: str = "default"
    index_budget: Optional[int] = None

    @property
    def total(self) -> int:
        return self.starts[-1]

    def eps(self, n: int) -> Radical:
        return normalize_radical(1, self.eps_sq[n])

    def block(self, node: Sequence[int]) -> tuple[int, int]:
        """Half-open index range of ``F_node``."""
        n = len(node)
        j = int("".join(map(str, node)), 2) if n else 0
        lo = self.starts[n] + j * self.k[n]
        return lo, lo + self.k[n]

    def locate(self, m: int) -> tuple[tuple[int, ...], int]:
        """Node whose block contains index ``m`` and the offset inside it."""
        if m < 0 or m >= self.total:
            raise OutOfRange(f"index {m} beyond the comb layout of {self.total} indices")
        n = bisect_right(self.starts, m) - 1
        j, off = divmod(m - self.starts[n], self.k[n])
        node = tuple((j >> (n - 1 - i)) & 1 for i in range(n))
        return node, off


def comb_params(depth: int, p_choice="default", index_budget: Optional[int] = None) -> CombParams:
    """Levels ``0..depth`` with minimal block sizes and length-lex layout."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if isinstance(p_choice, str):
        rule_name, rule = p_choice, EXPONENT_RULES[p_choice]
    else:
        rule_name, rule = "custom", p_choice
    ps = tuple(as_rat(rule(n)) for n in range(depth + 1))
    for a, b in zip(ps, ps[1:]):
        if not a > b:
            raise ValueError("exponents must strictly decrease")
    rs = tuple(comb_r(n) for n in range(depth + 1))
    ks = tuple(min_block_size(n, ps[n]) for n in range(depth + 1))
    eps_sq = tuple(Fraction(r, k) for r, k in zip(rs, ks))
    starts = [0]
    for n in range(depth + 1):
        starts.append(starts[-1] + (2**n) * ks[n])
        if index_budget is not None and starts[-1] > index_budget:
            raise BlockBudgetExceeded(n, starts[-1], index_budget)
    return CombParams(depth, ps, rs, ks, eps_sq, tuple(starts), rule_name, index_budget)


@dataclass(frozen=True)
class CombPath:
    """A point of ``2**omega``: a finite prefix followed by a constant tail."""

    bits: tuple[int, ...]
    tail: int = 1

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits) or self.tail not in (0, 1):
            raise ValueError("paths are 0/1 sequences")

    def bit(self, n: int) -> int:
        return self.bits[n] if n < len(self.bits) else self.tail

    def head(self, n: int) -> tuple[int, ...]:
        return tuple(self.bit(i) for i in range(n))

    def branch(self, n: int) -> tuple[int, ...]:
        return self.head(n)

    def tooth(self, n: int) -> tuple[int, ...]:
        if n == 0:
            raise ValueError("the root has no tooth")
        h = self.head(n)
        return h[:-1] + (1 - h[-1],)

    def label(self) -> str:
        return "".join(map(str, self.bits)) + f"({self.tail})"


def divergence_level(x: CombPath, y: CombPath) -> Optional[int]:
    """First ``N`` with ``x(N) != y(N)``, or ``None`` if the paths coincide."""
    for n in range(max(len(x.bits), len(y.bits)) + 1):
        if x.bit(n) != y.bit(n):
            return n
    return None


def _node_weight(params: CombParams, x: CombPath, node: tuple[int, ...]) -> Radical:
    n = len(node)
    if n == 0:
        return normalize_radical(1, 2 * params.eps_sq[0])
    if node == x.branch(n):
        return params.eps(n)
    if node == x.tooth(n):
        return -params.eps(n)
    return ZERO


def comb_entry(params: CombParams, x: CombPath, m: int) -> Radical:
    node, _ = params.locate(m)
    return _node_weight(params, x, node)


def _comb_nodes(x: CombPath, n: int) -> list[tuple[int, ...]]:
    return [()] if n == 0 else [x.branch(n), x.tooth(n)]


def _node_sign(x: CombPath, node: tuple[int, ...]) -> int:
    n = len(node)
    if n == 0 or node == x.branch(n):
        return 1
    if node == x.tooth(n):
        return -1
    return 0


def level_aggregate(params: CombParams, x: CombPath, y: CombPath, n: int) -> RadicalSum:
    """Exact contribution of level ``n`` blocks to ``(y_x, y_y)``.

    Both weights on a shared block are ``+-eps_n`` (``sqrt(2) eps_0`` at the
    root), so the product is ``+-eps_n**2`` and no square root is taken.
    """
    nodes = set(_comb_nodes(x, n)) | set(_comb_nodes(y, n))
    sq = 2 * params.eps_sq[0] if n == 0 else params.eps_sq[n]
    signs = sum(_node_sign(x, s) * _node_sign(y, s) for s in nodes)
    return RadicalSum.of(signs * sq * params.k[n])


def comb_partial(params: CombParams, x: CombPath, y: CombPath, level: int) -> RadicalSum:
    """``sum_{m < starts[level+1]} y_x(m) y_y(m)`` via level aggregates."""
    if level > params.depth:
        raise OutOfRange(f"level {level} beyond depth {params.depth}")
    return RadicalSum.total(level_aggregate(params, x, y, n) for n in range(level + 1))


def comb_inner(params: CombParams, x: CombPath, y: CombPath) -> InnerCertificate:
    split = divergence_level(x, y)
    if split is None:
        return _self_certificate(params)
    if split + 1 > params.depth:
        raise OutOfRange(f"paths split at level {split}; need depth >= {split + 1}")
    sums = []
    acc = RadicalSum()
    for n in range(split + 2):
        acc = acc + level_aggregate(params, x, y, n)
        sums.append((params.starts[n + 1], acc))
    return InnerCertificate("exact", acc, params.starts[split + 2], sums=sums)


def _self_certificate(params: CombParams) -> InnerCertificate:
    # sum over levels <= L of 2 r_n equals 2 r_{L+1} = 2**(L+1)
    def witness(bound: Fraction) -> int:
        level = 0
        while 2 ** (level + 1) <= bound:
            level += 1
        return _level_start(params, level + 1)

    samples = [(Fraction(b), witness(Fraction(b))) for b in (1, 10, 100)]
    return InnerCertificate("divergent", witness=witness, witness_samples=samples)


def _level_start(params: CombParams, n: int) -> int:
    if n <= params.depth + 1:
        return params.starts[n]
    rule = EXPONENT_RULES.get(params.rule, default_exponent)
    start = params.starts[-1]
    for i in range(params.depth + 1, n):
        start += 2**i * min_block_size(i, rule(i))
    return start


def self_partial(params: CombParams, x: CombPath, level: int) -> RadicalSum:
    return comb_partial(params, x, x, level)


# -- l_p ----------------------------------------------------------------------------

def lp_level_inequality(params: CombParams, n: int) -> bool:
    """``eps_n**p_n * k_n <= 1/n**2`` decided by clearing exponent denominators."""
    p = params.p[n]
    a, b = p.numerator, p.denominator
    r, k = params.r[n], params.k[n]
    # ((r/k)**(a/2b) * k)**(2b) <= n**(-4b)
    return Fraction(r**a * n ** (4 * b) * k ** (2 * b), k**a) <= 1


@dataclass
class LpReport:
    p: Fraction
    n0: int
    partial: Interval
    tail_bound: Fraction
    level_checks: list = field(default_factory=list)  # (n, eps_n < 1, inequality)

    @property
    def ok(self) -> bool:
        return all(small and ineq for _, small, ineq in self.level_checks)


def first_dominated_level(params: CombParams, p: Fraction) -> int:
    rule = EXPONENT_RULES.get(params.rule)
    n = 1
    while True:
        pn = params.p[n] if n <= params.depth else (rule(n) if rule else None)
        if pn is None:
            raise OutOfRange("custom exponent rule exhausted; build deeper params")
        if pn < p:
            return n
        n += 1


def comb_lp_report(params: CombParams, x: CombPath, p, bits: int = 64) -> LpReport:
    """Head enclosure below level ``n0`` plus the ``sum 2/n**2`` tail bound."""
    p = as_rat(p)
    if p <= 2:
        raise ValueError("the family is not in l_2: every element has a divergent square sum")
    n0 = first_dominated_level(params, p)
    if n0 - 1 > params.depth:
        raise OutOfRange(f"level {n0} beyond depth {params.depth}")
    half = p / 2
    partial = rational_power_interval(2 * params.eps_sq[0], half, bits).scale(Fraction(params.k[0]))
    for n in range(1, n0):
        partial = partial + rational_power_interval(params.eps_sq[n], half, bits).scale(Fraction(2 * params.k[n]))
    # sum_{n >= n0} 1/n**2 <= 1/n0**2 + 1/n0
    tail = 2 * (Fraction(1, n0 * n0) + Fraction(1, n0))
    checks = [
        (n, params.eps_sq[n] < 1, lp_level_inequality(params, n))
        for n in range(max(n0, 1), params.depth + 1)
    ]
    return LpReport(p, n0, partial, tail, checks)


# -- handles --------------------------------------------------------------------------

def comb_element(params: CombParams, x: CombPath) -> SeqHandle:
    def rule(m: int) -> Radical:
        return comb_entry(params, x, m)

    def ranges(n: int) -> list[tuple[int, int]]:
        return [params.block(s) for s in _comb_nodes(x, n)]

    def pair_rule(me: SeqHandle, other: SeqHandle):
        if other.meta.get("family") is not params or "path" not in other.meta:
            return None
        split = divergence_level(x, other.meta["path"])
        if split is None or split + 2 > params.depth + 1:
            return None
        return PairInfo(disjoint_beyond=params.starts[split + 2])

    def divergence(start: int, bound: Fraction) -> int:
        # block sums are constant per block, so scan levels then refine
        acc = Fraction(0)
        n = bisect_right(params.starts, start) - 1
        idx = start
        while n <= params.depth:
            for s in _comb_nodes(x, n):
                lo, hi = params.block(s)
                lo = max(lo, idx)
                if lo >= hi:
                    continue
                w = _node_weight(params, x, s).square()
                need = bound - acc
                if w * (hi - lo) > need:
                    return lo + int(need // w) + 1
                acc += w * (hi - lo)
            n += 1
        raise OutOfRange("divergence witness needs a deeper layout")

    def lp_tail(p: Fraction, upto: int) -> Optional[Fraction]:
        if p <= 2:
            return None
        n0 = first_dominated_level(params, p)
        level = bisect_right(params.starts, upto) - 1 if upto < params.total else params.depth + 1
        if level < n0 or level < 1:
            return None
        return 2 * (Fraction(1, level * level) + Fraction(1, level))

    return SeqHandle(
        name=f"comb:{x.label()}",
        rule=rule,
        support=BlockSupport(ranges),
        pair_rule=pair_rule,
        divergence=divergence,
        in_l2=False,
        lp_tail=lp_tail,
        length=params.total,
        meta={"family": params, "path": x},
    )


# -- full-support variant ---------------------------------------------------------------

def off_comb_weight(n: int) -> Fraction:
    return Fraction(1, 2 ** (4 * n))


def off_comb_tail(m: int) -> Fraction:
    """``sum_{i >= m} a_i**2 (2**i - 4)`` as an exact geometric sum."""
    q7, q8 = Fraction(1, 2**7), Fraction(1, 2**8)
    return q7**m / (1 - q7) - 4 * q8**m / (1 - q8)


def off_comb_bound_tail(m: int) -> Fraction:
    """``sum_{i >= m} a_i**2 2**i``: dominates the magnitude of every level ``>= m``
    beyond the split."""
    q7 = Fraction(1, 2**7)
    return q7**m / (1 - q7)


@dataclass(frozen=True)
class FullSupportComb:
    """Comb family with one index per node and small weights off the comb.

    Level counts follow the layout: level ``i >= 1`` has ``2**i`` nodes, two of
    which lie on a given comb, and the root lies on every comb.  Hence levels
    ``1 <= i <= N+1`` contribute ``a_i**2 (2**i - 2)`` off-comb and levels
    ``i > N+1`` contribute ``a_i**2 (2**i - 4)``; level 0 has no off-comb node.
    """

    depth: int
    b0: Fraction
    b_sq: tuple[Fraction, ...]

    @property
    def total(self) -> int:
        return 2 ** (self.depth + 1) - 1

    def b(self, n: int) -> Radical:
        return normalize_radical(1, self.b_sq[n])

    def residual(self, n: int) -> Fraction:
        """Left side of the balancing identity for a split at level ``n``."""
        s = self.b_sq[0] + 2 * sum(self.b_sq[1 : n + 1], Fraction(0)) - 2 * self.b_sq[n + 1]
        s += sum((off_comb_weight(i) ** 2 * (2**i - 2) for i in range(1, n + 2)), Fraction(0))
        return s + off_comb_tail(n + 2)

    def locate(self, m: int) -> tuple[int, ...]:
        if m < 0 or m >= self.total:
            raise OutOfRange(f"index {m} beyond depth {self.depth}")
        n = (m + 1).bit_length() - 1
        j = m + 1 - 2**n
        return tuple((j >> (n - 1 - i)) & 1 for i in range(n))

    def weight(self, x: CombPath, node: tuple[int, ...]) -> Radical:
        n = len(node)
        if n == 0:
            return Radical.of(self.b0)
        if node == x.branch(n):
            return self.b(n)
        if node == x.tooth(n):
            return -self.b(n)
        return Radical.of(off_comb_weight(n))

    def entry(self, x: CombPath, m: int) -> Radical:
        return self.weight(x, self.locate(m))

    def _symbol(self, x: CombPath, node: tuple[int, ...]) -> tuple[int, str]:
        n = len(node)
        if n == 0:
            return 1, "root"
        if node == x.branch(n):
            return 1, "b"
        if node == x.tooth(n):
            return -1, "b"
        return 1, "a"

    def cross_terms(self, x: CombPath, y: CombPath, n: int) -> list[int]:
        """Signs of the ``b_n * a_n`` products met at level ``n``."""
        out = []
        for s in sorted(set(_comb_nodes(x, n)) | set(_comb_nodes(y, n))):
            (sx, kx), (sy, ky) = self._symbol(x, s), self._symbol(y, s)
            if {kx, ky} == {"a", "b"}:
                out.append(sx * sy)
        return out

    def level_aggregate(self, x: CombPath, y: CombPath, n: int) -> RadicalSum:
        """Exact level-``n`` contribution to ``(x, y)``.

        ``b_n`` is kept symbolic: ``b_n**2`` is rational and the ``b_n * a_n``
        cross terms must cancel, which is checked rather than assumed.
        """
        if sum(self.cross_terms(x, y, n)) != 0:
            raise ArithmeticError(f"cross terms at level {n} do not cancel")
        special = sorted(set(_comb_nodes(x, n)) | set(_comb_nodes(y, n)))
        acc = Fraction(0)
        for s in special:
            (sx, kx), (sy, ky) = self._symbol(x, s), self._symbol(y, s)
            if kx == ky == "root":
                acc += self.b_sq[0]
            elif kx == ky == "b":
                acc += sx * sy * self.b_sq[n]
            elif kx == ky == "a":
                acc += off_comb_weight(n) ** 2
        acc += off_comb_weight(n) ** 2 * (2**n - len(special))
        return RadicalSum.of(acc)

    def partial(self, x: CombPath, y: CombPath, level: int) -> RadicalSum:
        return RadicalSum.total(self.level_aggregate(x, y, n) for n in range(level + 1))

    def tail_bound(self, x: CombPath, y: CombPath, level: int) -> Fraction:
        """Certified bound ``T(level) >= |sum of all levels > level|``."""
        split = divergence_level(x, y)
        if split is None:
            raise ValueError("identical paths")
        last = split + 1
        head = sum(
            (abs(self.level_aggregate(x, y, i).rational()) for i in range(level + 1, last + 1)),
            Fraction(0),
        )
        return head + off_comb_bound_tail(max(level, last) + 1)

    def certificate(self, x: CombPath, y: CombPath, level: int) -> InnerCertificate:
        split = divergence_level(x, y)
        if split is None:
            raise ValueError("identical paths have divergent inner product")
        if max(level, split + 1) > self.depth:
            raise OutOfRange(f"need depth >= {max(level, split + 1)}")
        sums = []
        acc = RadicalSum()
        for n in range(level + 1):
            acc = acc + self.level_aggregate(x, y, n)
            sums.append((2 ** (n + 1) - 1, acc))
        return InnerCertificate("partial", sums=sums, tail_bound=self.tail_bound(x, y, level))

    def element(self, x: CombPath) -> SeqHandle:
        def rule(m: int) -> Radical:
            return self.entry(x, m)

        return SeqHandle(
            name=f"comb-fs:{x.label()}",
            rule=rule,
            support=FullSupport(),
            in_l2=False,
            length=self.total,
            meta={"family": self, "path": x},
        )


def comb_full_support(depth: int, b0=1) -> FullSupportComb:
    b0 = as_rat(b0)
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    b_sq = [b0 * b0]
    for n in range(depth):
        # solve the balancing identity at split level n for b_{n+1}**2
        s = b_sq[0] + 2 * sum(b_sq[1 : n + 1], Fraction(0))
        s += sum((off_comb_weight(i) ** 2 * (2**i - 2) for i in range(1, n + 2)), Fraction(0))
        s += off_comb_tail(n + 2)
        b_sq.append(s / 2)
    return FullSupportComb(depth, b0, tuple(b_sq))
