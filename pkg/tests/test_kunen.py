import random
from fractions import Fraction

import mpmath
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from orthofam.exact import abs_compare
from orthofam.kunen import branch_prefix, kunen_branch, kunen_level, kunen_tree, maximality_witness
from orthofam.sequences import inner_certified

TREE = kunen_tree(12)


def to_sympy(vec):
    return sympy.Matrix([[sympy.Rational(e.coeff.numerator, e.coeff.denominator) * sympy.sqrt(e.radicand) for e in v] for v in vec])


@pytest.mark.parametrize("n", range(1, 13))
def test_level_certificate(n):
    cert = kunen_level(TREE, n)
    assert cert.ok
    assert all(v.length == n for v in cert.vectors)


@pytest.mark.parametrize("n", [3, 6, 9])
def test_gram_is_diagonal_in_sympy(n):
    m = to_sympy(TREE.level(n))
    g = (m * m.T).applyfunc(sympy.nsimplify)
    assert g.is_diagonal()
    assert m.rank() == n


def test_first_branch_norms():
    norms = [branch_prefix(TREE, d).norm_sq() for d in range(1, 13)]
    assert sorted(set(norms)) == [1, 2, 4, 8, 16]
    assert norms[:4] == [1, 2, 4, 4]


def test_split_weight_squares_to_parent_norm():
    for level, (parent, plus, minus) in TREE.split_at.items():
        w = TREE.node(level, plus)[level - 1]
        assert w.square() == TREE.node(level - 1, parent).norm_sq()
        assert TREE.node(level, minus)[level - 1] == -w


def test_branches_orthogonal():
    plus = kunen_branch(TREE)
    minus = kunen_branch(TREE, selector=lambda node, level: 1, name="kunen:-")
    cert = inner_certified(plus, minus)
    assert cert.is_exact_zero
    assert inner_certified(plus, plus).kind == "divergent"


vectors = st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=6), min_size=1, max_size=8).filter(
    lambda v: any(v)
)


def mp(v) -> mpmath.mpf:
    """High-precision value of a Radical or RadicalSum, computed without the package's sign logic."""
    items = v.items() if hasattr(v, "items") else [(v.radicand, v.coeff)]
    return mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * mpmath.sqrt(r) for r, c in items)


@given(vectors)
@settings(max_examples=50, deadline=None)
def test_witness_dominates(x):
    mpmath.mp.dps = 80
    w = maximality_witness(TREE, x)
    assert w.dominates
    n = w.start_level
    xs = (list(x) + [0] * n)[:n]
    direct = mpmath.fsum(mp(e) * mpmath.mpf(q.numerator) / q.denominator for e, q in zip(w.start_node, xs))
    tol = mpmath.mpf(10) ** -60
    assert abs(mp(w.start_value) - direct) < tol
    assert abs(mp(w.value)) > tol
    assert abs(mp(w.value)) >= abs(direct) - tol


def test_witness_examples():
    assert maximality_witness(TREE, [1, -1]).value.rational() == 2
    with pytest.raises(ValueError):
        maximality_witness(TREE, [0, 0])
