"""Orthogonal families tied to l2: the staircase, the grid with its
completions, and the unequal-weight perfect tree."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Callable, Optional, Sequence

from .exact import Radical, as_rat, sqrt_interval
from .linalg import nullspace, rank
from .sequences import BlockSupport, FiniteSupport, PairInfo, PrefixVec, SeqHandle

# -- staircase ----------------------------------------------------------------------


def staircase(n: int) -> PrefixVec:
    """``n + 1`` ones followed by ``-(n + 1)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return PrefixVec.of([1] * (n + 1) + [-(n + 1)])


@dataclass
class ComplementReport:
    depth: int
    basis: list[list[Fraction]]
    dimension: int
    ones_direction: bool
    triangular_ok: bool


def complement_basis(d: int) -> ComplementReport:
    """Orthogonal complement of the first ``d - 1`` staircase vectors in ``Q**d``."""
    if d < 2:
        raise ValueError("depth must be at least 2")
    rows = []
    for n in range(d - 1):
        v = staircase(n).rationals()
        rows.append(v + [Fraction(0)] * (d - len(v)))
    basis = nullspace(rows, d)
    ones = len(basis) == 1 and all(x == basis[0][0] and x != 0 for x in basis[0])
    # u_0 + ... + u_n = (n + 1) u_{n+1} for every n < d - 1
    tri = all(
        sum(u[: n + 1], Fraction(0)) == (n + 1) * u[n + 1] for u in basis for n in range(d - 1)
    )
    return ComplementReport(d, basis, len(basis), ones, tri)


# -- grid ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GridIndex:
    """Cantor pairing of ``omega x omega`` along anti-diagonals."""

    name: str = "cantor"

    @staticmethod
    def pair(n: int, m: int) -> int:
        d = n + m
        return d * (d + 1) // 2 + m

    @staticmethod
    def unpair(z: int) -> tuple[int, int]:
        d = (isqrt(8 * z + 1) - 1) // 2
        m = z - d * (d + 1) // 2
        return d - m, m

    @staticmethod
    def diagonal_start(d: int) -> int:
        return d * (d + 1) // 2


GRID = GridIndex()


def grid_vector(n: int, m: int, index: GridIndex = GRID) -> SeqHandle:
    """Row ``n`` carries the staircase ``(1, ..., 1, -(m+1))`` of length ``m + 2``."""
    if n < 0 or m < 0:
        raise ValueError("grid coordinates are nonnegative")
    vals = {index.pair(n, j): Fraction(1) for j in range(m + 1)}
    vals[index.pair(n, m + 1)] = Fraction(-(m + 1))

    def rule(z: int) -> Radical:
        return Radical.of(vals.get(z, 0))

    return SeqHandle(
        f"grid:{n}:{m}", rule, FiniteSupport(frozenset(vals)), in_l2=True,
        meta={"grid": (n, m)},
    )


def _row_indicator(name: str, rows: Callable[[int], bool], first_row: int, last_row: Optional[int],
                   index: GridIndex) -> SeqHandle:
    def rule(z: int) -> Radical:
        n, _ = index.unpair(z)
        return Radical.of(1 if rows(n) else 0)

    def ranges(d: int) -> list[tuple[int, int]]:
        # on diagonal d the row n sits at diagonal_start(d) + (d - n)
        hi = d if last_row is None else min(d, last_row)
        if hi < first_row:
            return []
        s = index.diagonal_start(d)
        return [(s + d - hi, s + d - first_row + 1)]

    def divergence(start: int, bound: Fraction) -> int:
        acc, z = 0, start
        while acc <= bound:
            acc += rows(index.unpair(z)[0])
            z += 1
        return z

    return SeqHandle(
        name, rule, BlockSupport(ranges), divergence=divergence, in_l2=False,
        meta={"rows": (first_row, last_row)},
    )


def completions(n: int, index: GridIndex = GRID) -> tuple[list[SeqHandle], SeqHandle]:
    """Row indicators ``y_0..y_{n-1}`` and the indicator ``v_n`` of rows ``>= n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ys = [_row_indicator(f"row:{i}", lambda r, i=i: r == i, i, i, index) for i in range(n)]
    v = _row_indicator(f"rows>={n}", lambda r: r >= n, n, None, index)
    # supports are pairwise disjoint
    disjoint = PairInfo(disjoint_beyond=0)
    ys = [y.with_pair(v.name, disjoint) for y in ys]
    for a in range(n):
        for b in range(n):
            if a != b:
                ys[a] = ys[a].with_pair(ys[b].name, disjoint)
    return ys, v


def row_inner(row_range: tuple[int, Optional[int]], grid: tuple[int, int]) -> Fraction:
    """Closed form of ``(indicator of rows, x^l_m)``: ``(m+1) - (m+1)`` or ``0``."""
    first, last = row_range
    l, m = grid
    inside = l >= first and (last is None or l <= last)
    return Fraction((m + 1) - (m + 1)) if inside else Fraction(0)


# -- unequal tree --------------------------------------------------------------------------


def minmax_radius(level: Sequence[PrefixVec]) -> Fraction:
    """``m**2 = (9/16) / sum_s ||s||**-2`` for an orthogonal basis ``level``."""
    vecs = [v.rationals() for v in level]
    if not vecs or rank(vecs) != len(vecs[0]) or len(vecs) != len(vecs[0]):
        raise ValueError("level must be an orthogonal basis of its space")
    return Fraction(9, 16) / sum((1 / v.norm_sq() for v in level), Fraction(0))


def _delta_for(m_sq: Fraction, prev: Fraction) -> Fraction:
    """Largest power of 1/2 with ``delta**2 <= min(m**2/4, prev**2) / 4``."""
    bound = min(m_sq / 4, prev * prev) / 4
    d = Fraction(1)
    while d * d > bound:
        d /= 2
    return d


@dataclass
class UnequalTree:
    levels: list[list[PrefixVec]] = field(default_factory=list)
    ids: list[list[int]] = field(default_factory=list)
    delta: dict[int, Fraction] = field(default_factory=dict)  # split level -> delta
    b: dict[int, Fraction] = field(default_factory=dict)
    m_sq: dict[int, Fraction] = field(default_factory=dict)
    split_queue: deque = field(default_factory=deque)
    split_at: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    _next_id: int = 1

    @classmethod
    def start(cls) -> "UnequalTree":
        t = cls(levels=[[PrefixVec.of([1])]], ids=[[0]])
        t.split_queue.append(0)
        return t

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, n: int) -> list[PrefixVec]:
        return self.levels[n - 1]

    def node(self, n: int, node_id: int) -> PrefixVec:
        return self.levels[n - 1][self.ids[n - 1].index(node_id)]

    def extend(self) -> "UnequalTree":
        n = self.depth
        parent = self.split_queue.popleft()
        vecs, ids = self.levels[-1], self.ids[-1]
        pos = ids.index(parent)
        s = vecs[pos]
        if n == 1:
            d, bb = Fraction(1), Fraction(1)
        else:
            m_sq = minmax_radius(vecs)
            self.m_sq[n] = m_sq
            d = _delta_for(m_sq, self.delta[n - 1])
            bb = s.norm_sq() / d
        self.delta[n], self.b[n] = d, bb
        plus, minus = self._next_id, self._next_id + 1
        self._next_id += 2
        new_vecs, new_ids = [], []
        for i, (v, nid) in enumerate(zip(vecs, ids)):
            if i == pos:
                new_vecs += [v.extend(d), v.extend(-bb)]
                new_ids += [plus, minus]
            else:
                new_vecs.append(v.extend(0))
                new_ids.append(nid)
        self.split_queue.extend([plus, minus])
        self.split_at[n + 1] = (parent, plus, minus)
        self.levels.append(new_vecs)
        self.ids.append(new_ids)
        return self

    def ensure(self, depth: int) -> "UnequalTree":
        while self.depth < depth:
            self.extend()
        return self

    def split_node(self, n: int) -> PrefixVec:
        """The node of ``T_n`` split on the way to level ``n + 1``."""
        return self.node(n, self.split_at[n + 1][0])


def unequal_tree(depth: int) -> UnequalTree:
    return UnequalTree.start().ensure(depth)


def unequal_extend(tree: UnequalTree) -> UnequalTree:
    return tree.extend()


def _follow(tree: UnequalTree, start_level: int, node: int, depth: int, choices: Callable[[int, int], int]) -> int:
    for level in range(start_level + 1, depth + 1):
        parent, plus, minus = tree.split_at[level]
        if parent == node:
            node = minus if choices(parent, level) else plus
    return node


def tail_square_bound(n: int) -> Fraction:
    """``sum_{c >= n} 4**-(c-1)``, dominating ``sum_{c >= n} delta_c**2``."""
    return Fraction(4, 3) * Fraction(1, 4) ** (n - 1) if n >= 1 else Fraction(16, 3)


def e_member(tree: UnequalTree, n: int, choices: Callable[[int, int], int] = lambda p, l: 0) -> SeqHandle:
    """Branch with arbitrary choices through level ``n``, then always the ``+delta`` child."""
    tree.ensure(n)
    return e_member_from(tree, n, _follow(tree, 1, 0, n, choices))


@dataclass
class L2Witness:
    n: int
    scale: Fraction
    node: PrefixVec
    head: Fraction  # (s, scale * x|n)
    value: Fraction  # (x, y) for the unscaled x
    m_sq: Fraction
    delta: Fraction
    member: SeqHandle

    @property
    def dominates(self) -> bool:
        # x has finite support inside the first n coordinates, so the tail term is 0
        # and a nonzero value with |(s, x)| >= m certifies the witness
        return self.value != 0 and self.head * self.head >= self.m_sq

    @property
    def tail_room(self) -> bool:
        """``m >= 4 delta_n``: the margin that absorbs a nonzero tail of ``x``.

        It holds from level 2 on; ``delta_1 = 1`` is fixed by the first split."""
        return self.m_sq >= 16 * self.delta * self.delta


def l2_witness(tree: UnequalTree, x: Sequence, auto_extend: bool = False) -> L2Witness:
    xs = [as_rat(v) for v in x]
    support = [i for i, v in enumerate(xs) if v != 0]
    if not support:
        raise ValueError("the zero vector has no witness")
    n = support[-1] + 1
    if tree.depth < n + 1:
        if not auto_extend:
            raise LookupError(f"tree depth {tree.depth} too small: build to depth {n + 1}")
        tree.ensure(n + 1)
    norm_sq = sum((v * v for v in xs), Fraction(0))
    # rational r with ||x|| <= r <= (4/3)||x||, so 9/16 <= ||x/r||**2 <= 1
    bits = 8
    while True:
        enc = sqrt_interval(norm_sq, bits)
        if enc.lo > 0 and 3 * enc.hi <= 4 * enc.lo:
            break
        bits *= 2
    r = enc.hi
    scale = 1 / r
    xn = [v * scale for v in xs[:n]]
    best_i, best = 0, None
    for i, s in enumerate(tree.level(n)):
        v = s.dot(xn).rational()
        if best is None or abs(v) > abs(best):
            best_i, best = i, v
    node_id = tree.ids[n - 1][best_i]
    m_sq = minmax_radius(tree.level(n)) if n > 1 else Fraction(9, 16)
    delta = tree.delta[n]
    member = e_member_from(tree, n, node_id)
    value = member.prefix(n).dot(xs[:n]).rational()
    return L2Witness(n, scale, tree.level(n)[best_i], best, value, m_sq, delta, member)


def e_member_from(tree: UnequalTree, n: int, node_id: int) -> SeqHandle:
    """Member of ``E`` through a given node of ``T_n``."""

    def rule(c: int) -> Radical:
        if c < n:
            return Radical.of(tree.node(n, node_id)[c])
        tree.ensure(c + 1)
        return Radical.of(tree.node(c + 1, _follow(tree, n, node_id, c + 1, lambda p, l: 0))[c])

    return SeqHandle(
        f"E:{n}:{node_id}", rule, in_l2=True,
        lp_tail=lambda p, upto: tail_square_bound(max(upto, n)) if p == 2 else None,
        meta={"tree": tree, "level": n, "node": node_id},
    )
