"""Kunen's perfect tree of orthogonal vectors.

Level ``n`` holds ``n`` pairwise orthogonal vectors of length ``n``.  Going up
one level, the oldest unsplit node ``s`` is replaced by ``s + (w,)`` and
``s + (-w,)`` with ``w**2 = (s, s)``; every other node gets a trailing zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .exact import Radical, RadicalSum, abs_compare, as_rat, normalize_radical, sum_sign
from .linalg import rank_radical
from .sequences import PairInfo, PrefixVec, SeqHandle

# selector(node_id, level) -> 0 for the + child, 1 for the - child
Selector = Callable[[int, int], int]


def plus_selector(node_id: int, level: int) -> int:
    return 0


@dataclass
class KunenTree:
    levels: list[list[PrefixVec]] = field(default_factory=list)
    ids: list[list[int]] = field(default_factory=list)
    norms_sq: dict[int, Fraction] = field(default_factory=dict)
    split_queue: deque = field(default_factory=deque)
    # split_at[level] = (parent id, plus child id, minus child id); level >= 2
    split_at: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    _next_id: int = 1

    @classmethod
    def start(cls) -> "KunenTree":
        tree = cls(levels=[[PrefixVec.of([1])]], ids=[[0]], norms_sq={0: Fraction(1)})
        tree.split_queue.append(0)
        return tree

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, n: int) -> list[PrefixVec]:
        return self.levels[n - 1]

    def level_ids(self, n: int) -> list[int]:
        return self.ids[n - 1]

    def node(self, n: int, node_id: int) -> PrefixVec:
        return self.level(n)[self.level_ids(n).index(node_id)]

    def extend(self) -> "KunenTree":
        parent = self.split_queue.popleft()
        n = self.depth
        vecs, ids = self.levels[-1], self.ids[-1]
        pos = ids.index(parent)
        w = normalize_radical(1, self.norms_sq[parent])
        plus, minus = self._next_id, self._next_id + 1
        self._next_id += 2
        new_vecs, new_ids = [], []
        for i, (v, nid) in enumerate(zip(vecs, ids)):
            if i == pos:
                new_vecs += [v.extend(w), v.extend(-w)]
                new_ids += [plus, minus]
            else:
                new_vecs.append(v.extend(0))
                new_ids.append(nid)
        child_norm = 2 * self.norms_sq[parent]
        self.norms_sq[plus] = self.norms_sq[minus] = child_norm
        self.split_queue.extend([plus, minus])
        self.split_at[n + 1] = (parent, plus, minus)
        self.levels.append(new_vecs)
        self.ids.append(new_ids)
        return self

    def ensure(self, depth: int) -> "KunenTree":
        while self.depth < depth:
            self.extend()
        return self

    def queue_position(self, node_id: int) -> int:
        return list(self.split_queue).index(node_id)


def kunen_tree(depth: int) -> KunenTree:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return KunenTree.start().ensure(depth)


def kunen_extend(tree: KunenTree) -> KunenTree:
    return tree.extend()


@dataclass
class LevelCertificate:
    n: int
    vectors: list[PrefixVec]
    rank: int
    nonzero_pairs: list[tuple[int, int, RadicalSum]]

    @property
    def ok(self) -> bool:
        return len(self.vectors) == self.n and self.rank == self.n and not self.nonzero_pairs


def kunen_level(tree: KunenTree, n: int) -> LevelCertificate:
    if n > tree.depth:
        raise IndexError(f"level {n} not built (depth {tree.depth})")
    vecs = tree.level(n)
    bad = []
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            v = vecs[i].dot(vecs[j])
            if not v.is_zero():
                bad.append((i, j, v))
    return LevelCertificate(n, vecs, rank_radical([list(v) for v in vecs]), bad)


def branch_path(tree: KunenTree, depth: int, selector: Selector = plus_selector, start=(1, 0)) -> list[int]:
    """Node ids along a branch at levels ``start[0]..depth``."""
    level, node = start
    tree.ensure(depth)
    path = [node]
    for n in range(level + 1, depth + 1):
        parent, plus, minus = tree.split_at[n]
        if parent == node:
            node = minus if selector(parent, n) else plus
        path.append(node)
    return path


def branch_prefix(tree: KunenTree, depth: int, selector: Selector = plus_selector) -> PrefixVec:
    node = branch_path(tree, depth, selector)[-1]
    return tree.node(depth, node)


def kunen_branch(tree: KunenTree, selector: Selector = plus_selector, name: str = "kunen:+") -> SeqHandle:
    def rule(m: int) -> Radical:
        return branch_prefix(tree, m + 1, selector)[m]

    def nodes_upto(depth: int) -> list[int]:
        return branch_path(tree, depth, selector)

    def pair_rule(me: SeqHandle, other: SeqHandle) -> Optional[PairInfo]:
        if other.meta.get("tree") is not tree:
            return None
        mine, theirs = me.meta["nodes"], other.meta["nodes"]
        depth = tree.depth
        while True:
            a, b = mine(depth), theirs(depth)
            diff = next((i for i, (u, v) in enumerate(zip(a, b)) if u != v), None)
            if diff is not None:
                # the two nodes are siblings born at level diff+1, coordinate diff
                return PairInfo(disjoint_beyond=diff + 1)
            if depth > 4 * tree.depth + 64:
                return None
            depth *= 2

    def divergence(start: int, bound: Fraction) -> int:
        # norms double at each split, so the squared tail eventually exceeds any bound
        acc, m = Fraction(0), start
        while True:
            acc += rule(m).square()
            m += 1
            if acc > bound:
                return m

    return SeqHandle(
        name=name,
        rule=rule,
        pair_rule=pair_rule,
        divergence=divergence,
        in_l2=False,
        meta={"tree": tree, "nodes": nodes_upto},
    )


@dataclass
class Witness:
    start_level: int
    start_node: PrefixVec
    start_value: RadicalSum
    prefix: PrefixVec
    value: RadicalSum

    @property
    def dominates(self) -> bool:
        return not self.value.is_zero() and abs_compare(self.value, self.start_value) >= 0


def maximality_witness(tree: KunenTree, x: Sequence, start: Optional[int] = None) -> Witness:
    """Branch prefix whose inner product with the finite-support ``x`` is nonzero.

    ``start`` defaults to one past the last nonzero coordinate of ``x``; a
    smaller start uses greedy sign agreement on the remaining coordinates.
    """
    xs = [as_rat(v) for v in x]
    support = [i for i, v in enumerate(xs) if v != 0]
    if not support:
        raise ValueError("the zero vector has no witness")
    end = support[-1] + 1
    n = end if start is None else max(1, start)
    tree.ensure(end + 1)
    xr = PrefixVec.of(xs + [0] * (end + 1 - len(xs)))
    best_i, best_v = 0, None
    for i, s in enumerate(tree.level(n)):
        v = s.dot(xr[:n])
        if best_v is None or abs_compare(v, best_v) > 0:
            best_i, best_v = i, v
    if best_v.is_zero():
        raise ArithmeticError("level has no vector with nonzero inner product")
    sigma = sum_sign(best_v)
    node = tree.level_ids(n)[best_i]
    for level in range(n + 1, end + 2):
        parent, plus, minus = tree.split_at[level]
        if parent == node:
            c = level - 1
            xc = xr[c].sign() if c < len(xr) else 0
            # + child carries +w at coordinate c; keep sigma * w * x(c) >= 0
            node = minus if xc * sigma < 0 else plus
    prefix = tree.node(end + 1, node)
    return Witness(n, tree.level(n)[best_i], best_v, prefix, prefix.dot(xr))
