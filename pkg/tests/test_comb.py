import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from orthofam.comb import (
    BlockBudgetExceeded,
    CombPath,
    comb_entry,
    comb_full_support,
    comb_inner,
    comb_lp_report,
    comb_params,
    comb_partial,
    comb_r,
    divergence_level,
    first_dominated_level,
    level_aggregate,
    lp_level_inequality,
    min_block_size,
    off_comb_weight,
)
from orthofam.exact import RadicalSum, compare

DEPTH = 13
PARAMS = comb_params(DEPTH)


def brute_min_k(n: int, p: Fraction) -> int:
    """Scan k = r+1, r+2, ... for k**(p/2 - 1) >= n**2 r**(p/2), powered up by 2q."""
    a, q = p.numerator, p.denominator
    r = comb_r(n)
    # k**((a - 2q) / 2q) >= n**2 r**(a / 2q)  <=>  k**(a - 2q) >= n**(4q) r**a
    k = r + 1
    while k ** (a - 2 * q) < n ** (4 * q) * r**a:
        k += 1
    return k


def block_inner(params, x: CombPath, y: CombPath, level: int):
    """(x, y) summed block by block from raw entries, independent of the level aggregates."""
    acc = RadicalSum()
    for n in range(level + 1):
        for j in range(2**n):
            node = tuple((j >> (n - 1 - i)) & 1 for i in range(n))
            lo, hi = params.block(node)
            acc = acc + RadicalSum.of(comb_entry(params, x, lo) * comb_entry(params, y, lo)) * (hi - lo)
    return acc


paths = st.builds(
    CombPath, st.lists(st.integers(0, 1), max_size=12).map(tuple), st.integers(0, 1)
)


def test_r_sequence():
    assert [comb_r(n) for n in range(7)] == [1, 1, 2, 4, 8, 16, 32]


def test_block_sizes_match_scan():
    assert PARAMS.k[:3] == (2, 2, 2**19)
    for n in range(3):
        assert PARAMS.k[n] == brute_min_k(n, PARAMS.p[n])


def sym(q: Fraction):
    return sympy.Rational(q.numerator, q.denominator)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_block_size_boundary_with_sympy(n):
    p, k, r = sym(PARAMS.p[n]), PARAMS.k[n], comb_r(n)
    ok = lambda kk: sympy.Integer(kk) ** (p / 2 - 1) >= n**2 * sympy.Integer(r) ** (p / 2)
    assert ok(k)
    assert k == r + 1 or not ok(k - 1)


@given(paths, paths)
@settings(max_examples=60, deadline=None)
def test_distinct_paths_are_orthogonal(x, y):
    split = divergence_level(x, y)
    if split is None:
        return
    cert = comb_inner(PARAMS, x, y)
    assert cert.is_exact_zero
    assert cert.stable_from == PARAMS.starts[split + 2]


@pytest.mark.parametrize("seed", range(4))
def test_aggregates_match_block_sums(seed):
    rng = random.Random(seed)
    x = CombPath(tuple(rng.randint(0, 1) for _ in range(6)), rng.randint(0, 1))
    y = CombPath(tuple(rng.randint(0, 1) for _ in range(6)), rng.randint(0, 1))
    for level in range(8):
        assert comb_partial(PARAMS, x, y, level) == block_inner(PARAMS, x, y, level)


@given(paths, st.integers(0, 12))
@settings(max_examples=40, deadline=None)
def test_self_partial_telescopes(x, level):
    assert comb_partial(PARAMS, x, x, level) == RadicalSum.of(2 * comb_r(level + 1))


@given(paths, paths, st.integers(0, 12))
@settings(max_examples=60, deadline=None)
def test_aggregates_are_rational(x, y, n):
    assert level_aggregate(PARAMS, x, y, n).is_rational()


def test_self_inner_diverges():
    cert = comb_inner(PARAMS, CombPath((0, 1)), CombPath((0, 1)))
    assert cert.kind == "divergent"
    for bound, end in cert.witness_samples:
        level = PARAMS.starts.index(end) - 1
        assert compare(comb_partial(PARAMS, CombPath(()), CombPath(()), level), bound) == 1


@pytest.mark.parametrize("n", range(2, 7))
def test_lp_inequality_against_sympy(n):
    assert lp_level_inequality(PARAMS, n)
    value = sympy.Rational(PARAMS.r[n], PARAMS.k[n]) ** (sym(PARAMS.p[n]) / 2) * PARAMS.k[n]
    assert value <= sympy.Rational(1, n * n)


def test_lp_report():
    rep = comb_lp_report(PARAMS, CombPath(()), Fraction(5, 2))
    assert rep.n0 == first_dominated_level(PARAMS, Fraction(5, 2)) == 2
    assert rep.ok
    assert rep.partial.lo <= rep.partial.hi
    with pytest.raises(ValueError):
        comb_lp_report(PARAMS, CombPath(()), 2)


def test_exponent_validation_and_budget():
    with pytest.raises(ValueError):
        min_block_size(2, Fraction(2))
    with pytest.raises(ValueError):
        comb_params(3, lambda n: Fraction(3))
    with pytest.raises(BlockBudgetExceeded):
        comb_params(4, index_budget=10**6)


FS = comb_full_support(12)


def test_full_support_residuals_vanish():
    assert all(FS.residual(n) == 0 for n in range(9))


B = sympy.symbols("b1:14", positive=True)


def symbolic_weight(x: CombPath, node: tuple[int, ...]):
    n = len(node)
    if n == 0:
        return sympy.Integer(1)
    head = tuple(x.bit(i) for i in range(n))
    if node == head:
        return B[n - 1]
    if node == head[:-1] + (1 - head[-1],):
        return -B[n - 1]
    return sympy.Rational(1, 2 ** (4 * n))


def explicit_partial(fs, x, y, level):
    """Entry-by-entry sum with symbolic b_n, then b_n**2 substituted."""
    total = sympy.Integer(0)
    for n in range(level + 1):
        for j in range(2**n):
            node = tuple((j >> (n - 1 - i)) & 1 for i in range(n))
            total += symbolic_weight(x, node) * symbolic_weight(y, node)
    total = sympy.expand(total)
    return total.subs({B[n - 1] ** 2: sym(fs.b_sq[n]) for n in range(1, level + 1)})


@pytest.mark.parametrize("seed", range(3))
def test_full_support_partial_matches_entries(seed):
    rng = random.Random(seed)
    x = CombPath(tuple(rng.randint(0, 1) for _ in range(4)), 0)
    y = CombPath(tuple(rng.randint(0, 1) for _ in range(4)), 1)
    for level in range(9):
        assert sym(FS.partial(x, y, level).rational()) == explicit_partial(FS, x, y, level)


@given(paths, paths)
@settings(max_examples=30, deadline=None)
def test_full_support_tail_bounds(x, y):
    split = divergence_level(x, y)
    if split is None or split + 1 > FS.depth:
        return
    bounds = [FS.tail_bound(x, y, level) for level in range(13)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))
    for level in range(13):
        assert abs(FS.partial(x, y, level).rational()) <= bounds[level]


def test_full_support_entries_nonzero():
    x = CombPath((1, 0, 1))
    assert all(FS.entry(x, m).sign() != 0 for m in range(2**3 - 1))
    # deeper b_n stay symbolic; their squares are positive at every level
    assert all(b > 0 for b in FS.b_sq)
    assert off_comb_weight(3) == Fraction(1, 2**12)
