from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from orthofam.exact import Radical, RadicalSum, compare, normalize_radical
from orthofam.linalg import DependentVectors, independence_relation, nullspace, rank, rank_radical, solve
from orthofam.sequences import (
    FiniteSupport,
    PairInfo,
    PrefixVec,
    SeqHandle,
    Unverifiable,
    finite_handle,
    inner_certified,
    inner_partial,
    lp_report,
    min_abs_seq,
    strongly_orthogonal,
)

small = st.integers(min_value=-4, max_value=4).map(Fraction)
matrices = st.integers(min_value=1, max_value=4).flatmap(
    lambda n: st.lists(st.lists(small, min_size=n, max_size=n), min_size=1, max_size=4)
)


@given(matrices)
@settings(max_examples=120, deadline=None)
def test_rank_matches_sympy(rows):
    assert rank(rows) == sympy.Matrix(rows).rank()


@given(matrices)
@settings(max_examples=80, deadline=None)
def test_nullspace_is_kernel(rows):
    n = len(rows[0])
    basis = nullspace(rows, n)
    assert len(basis) == n - rank(rows)
    for v in basis:
        assert all(sum(a * b for a, b in zip(r, v)) == 0 for r in rows)


def test_rank_radical_with_square_roots():
    r2 = normalize_radical(1, 2)
    rows = [[Radical.of(1), Radical.of(1), r2], [Radical.of(1), Radical.of(1), -r2], [Radical.of(1), Radical.of(-1), Radical.of(0)]]
    assert rank_radical(rows) == 3
    assert rank_radical([[r2, Radical.of(1)], [Radical.of(2), r2]]) == 1


def test_solve_and_relation():
    assert solve([[2, 1], [1, 3]], [3, 5]) == [Fraction(4, 5), Fraction(7, 5)]
    assert independence_relation([[1, 0], [0, 1]]) is None
    rel = independence_relation([[1, 2], [2, 4]])
    assert rel is not None and rel[0] * 1 + rel[1] * 2 == 0
    assert issubclass(DependentVectors, ValueError)


def _disjoint_pair(n0: int):
    # x is 1 on even indices, y on odd indices, both 1 below n0
    x = SeqHandle("x", lambda n: Radical.of(1 if n < n0 or n % 2 == 0 else 0))
    y = SeqHandle("y", lambda n: Radical.of((-1 if n == 0 else 1) if n < n0 or n % 2 == 1 else 0))
    return x.with_pair("y", PairInfo(disjoint_beyond=n0)), y


def test_inner_certified_dispatch():
    a = finite_handle("a", [1, 2, 0, 3])
    b = finite_handle("b", [3, -1, 5])
    cert = inner_certified(a, b)
    assert cert.kind == "exact" and cert.value == RadicalSum.of(1)
    x, y = _disjoint_pair(2)
    cert = inner_certified(x, y)
    assert cert.is_exact_zero and cert.stable_from == 2
    with pytest.raises(Unverifiable):
        inner_certified(SeqHandle("u", lambda n: Radical.of(1)), SeqHandle("v", lambda n: Radical.of(1)))


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=40))
@settings(max_examples=40, deadline=None)
def test_disjoint_beyond_partial_sums_are_constant(n0, extra):
    x, y = _disjoint_pair(n0)
    assert inner_partial(x, y, n0 + extra) == inner_partial(x, y, n0)


def test_divergent_self_certificate():
    x = SeqHandle("ones", lambda n: Radical.of(1), divergence=lambda start, bound: start + int(bound) + 1)
    cert = inner_certified(x, x)
    assert cert.kind == "divergent"
    for bound, end in cert.witness_samples:
        assert compare(inner_partial(x, x, end), bound) == 1


@given(st.lists(st.fractions(min_value=-9, max_value=9, max_denominator=9), max_size=12))
@settings(max_examples=80, deadline=None)
def test_lp_report_p2_is_square_sum(vals):
    h = finite_handle("h", vals)
    enc, _ = lp_report(h, 2, len(vals))
    assert enc.lo == enc.hi == sum((v * v for v in vals), Fraction(0))


@given(st.lists(small, min_size=1, max_size=10), st.lists(small, min_size=1, max_size=10))
@settings(max_examples=80, deadline=None)
def test_min_abs_seq_symmetric_and_below(u, v):
    x, y = finite_handle("x", u), finite_handle("y", v)
    n = max(len(u), len(v))
    m1, m2 = min_abs_seq(x, y, n), min_abs_seq(y, x, n)
    assert [e.square() for e in m1] == [e.square() for e in m2]
    for i in range(n):
        assert m1[i].square() <= x(i).square() and m1[i].square() <= y(i).square()


def test_strongly_orthogonal():
    x, y = _disjoint_pair(2)
    ok, ev = strongly_orthogonal(x, y)
    assert ok and "support" in ev
    a, b = finite_handle("a", [1, 1]), finite_handle("b", [1, 2])
    assert strongly_orthogonal(a, b)[0] is False


def test_prefix_vec_basics():
    v = PrefixVec.of([1, -1])
    assert v.extend(2).length == 3
    assert v.norm_sq() == 2
    assert v.dot([3, 1]) == RadicalSum.of(2)
    assert isinstance(finite_handle("z", [0, 1]).support, FiniteSupport)
