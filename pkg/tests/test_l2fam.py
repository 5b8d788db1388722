import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_minmax
from orthofam.kunen import kunen_tree
from orthofam.l2fam import (
    GRID,
    complement_basis,
    completions,
    e_member,
    grid_vector,
    l2_witness,
    minmax_radius,
    row_inner,
    staircase,
    tail_square_bound,
    unequal_tree,
)
from orthofam.linalg import rank
from orthofam.sequences import PrefixVec, inner_certified, inner_partial

TREE = unequal_tree(12)


def test_staircase_orthogonal():
    for a in range(8):
        for b in range(a + 1, 8):
            u, v = staircase(a), staircase(b)
            n = max(u.length, v.length)
            uu, vv = u.rationals() + [0] * (n - u.length), v.rationals() + [0] * (n - v.length)
            assert sum(x * y for x, y in zip(uu, vv)) == 0


@pytest.mark.parametrize("d", range(2, 11))
def test_complement_is_ones(d):
    rep = complement_basis(d)
    assert rep.dimension == 1 and rep.ones_direction and rep.triangular_ok


@given(st.integers(0, 200), st.integers(0, 200))
def test_grid_pairing_round_trip(n, m):
    z = GRID.pair(n, m)
    assert GRID.unpair(z) == (n, m)
    assert GRID.diagonal_start(n + m) <= z < GRID.diagonal_start(n + m + 1)


def test_grid_vectors_orthogonal():
    vecs = [grid_vector(n, m) for n in range(3) for m in range(4)]
    for i, a in enumerate(vecs):
        for b in vecs[i + 1 :]:
            assert inner_certified(a, b).is_exact_zero


@pytest.mark.parametrize("n", [1, 2, 4])
def test_completions(n):
    ys, v = completions(n)
    for i, y in enumerate(ys):
        assert inner_certified(y, v).is_exact_zero
        for l in range(n + 2):
            for m in range(3):
                x = grid_vector(l, m)
                stop = GRID.pair(l, m + 1) + 1
                assert inner_partial(y, x, stop).rational() == row_inner((i, i), (l, m))
    for l in range(n, n + 3):
        for m in range(3):
            x = grid_vector(l, m)
            assert inner_partial(v, x, GRID.pair(l, m + 1) + 1).rational() == row_inner((n, None), (l, m)) == 0
    assert inner_certified(v, v).kind == "divergent"


@pytest.mark.parametrize("n", range(1, 13))
def test_tree_levels(n):
    level = TREE.level(n)
    assert len(level) == n
    for i in range(n):
        for j in range(i + 1, n):
            assert level[i].dot(level[j].rationals()).is_zero()
    assert rank([v.rationals() for v in level]) == n


def test_delta_and_b():
    for n, d in TREE.delta.items():
        assert d <= Fraction(1, 2 ** (n - 1))
        assert d * TREE.b[n] == TREE.split_node(n).norm_sq()
    # level 2 -> 3 splits (1, 1)
    assert TREE.delta[2] == Fraction(1, 8) and TREE.b[2] == 16
    assert all(TREE.delta[n + 1] <= TREE.delta[n] / 2 for n in range(2, 11))


@pytest.mark.parametrize("n", range(1, 5))
def test_minmax_grid_on_tree(n):
    m = math.sqrt(minmax_radius(TREE.level(n)))
    assert abs(grid_minmax(TREE.level(n)) - m) <= 0.1 * m


UNEQUAL_BASES = [
    [PrefixVec.of([2])],
    [PrefixVec.of([1, 1]), PrefixVec.of([3, -3])],
    [PrefixVec.of([1, 2]), PrefixVec.of([-6, 3])],
    kunen_tree(3).level(3),
    [PrefixVec.of([1, 1, 1, 0]), PrefixVec.of([1, -1, 0, 5]), PrefixVec.of([-5, 5, 0, 2]), PrefixVec.of([1, 1, -2, 0])],
]


@pytest.mark.parametrize("level", UNEQUAL_BASES[:3] + [UNEQUAL_BASES[4]])
def test_minmax_grid_on_unequal_bases(level):
    m = math.sqrt(minmax_radius(level))
    assert abs(grid_minmax(level) - m) <= 0.1 * m


def test_minmax_examples():
    assert minmax_radius([PrefixVec.of([1])]) == Fraction(9, 16)
    assert minmax_radius([PrefixVec.of([1, 1]), PrefixVec.of([1, -1])]) == Fraction(9, 16)
    base = UNEQUAL_BASES[2]
    scaled = [PrefixVec.of([3 * v for v in s.rationals()]) for s in base]
    assert minmax_radius(scaled) == 9 * minmax_radius(base)
    with pytest.raises(ValueError):
        minmax_radius([PrefixVec.of([1, 1]), PrefixVec.of([2, 2])])


def test_e_member_tail():
    y = e_member(TREE, 4)
    sq = sum((y(c).square() for c in range(4, 12)), Fraction(0))
    assert sq <= tail_square_bound(4)
    assert all(y(c).rational() in (0, TREE.delta.get(c, None)) for c in range(4, 11))


def test_witness_examples():
    w = l2_witness(TREE, [Fraction(3, 5), Fraction(4, 5)])
    assert w.value == Fraction(7, 5) and w.dominates
    assert l2_witness(TREE, [1]).value == 1
    with pytest.raises(LookupError):
        l2_witness(unequal_tree(2), [0, 0, 1])
    with pytest.raises(ValueError):
        l2_witness(TREE, [0])


@given(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=5), min_size=1, max_size=8).filter(any))
@settings(max_examples=40, deadline=None)
def test_witness_nonzero(x):
    w = l2_witness(TREE, x)
    assert w.dominates
    assert w.tail_room == (w.n >= 2)
    n = w.n
    direct = sum((a * b for a, b in zip(w.member.prefix(n).rationals(), x)), Fraction(0))
    assert direct == w.value != 0
    norm_sq = sum((v * v for v in x), Fraction(0)) * w.scale**2
    assert Fraction(9, 16) <= norm_sq <= 1
