from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_check, sym
from orthofam.diagonal import (
    InvariantViolation,
    MACondition,
    NoDonor,
    NormGoal,
    Registry,
    ReqGoal,
    all_ones,
    diagonalize,
    empty_condition,
    even_indicator,
    finite_seq,
    harmonic_signs,
    ma_add_requirement,
    ma_alternate_norm,
    ma_grow_norm,
    ma_with_l2_side,
    odd_indicator,
    residue_indicator,
    solve_targets,
    verify_condition,
)
from orthofam.linalg import DependentVectors
from orthofam.sequences import Unverifiable


def even_odd() -> Registry:
    reg = Registry()
    reg.register(even_indicator("even"))
    reg.register(odd_indicator("odd"))
    return reg


def test_rho_block_example():
    reg = Registry()
    reg.register(all_ones("x"))
    c = MACondition((Fraction(3),), frozenset(), (), reg)
    out = ma_add_requirement(c, "x", Fraction(1, 2))
    assert out.s == (3,) + (Fraction(-3, 4),) * 4
    assert brute_check(out)


def test_grow_norm_with_donor():
    reg = Registry()
    reg.register(all_ones("x"))
    c = ma_grow_norm(empty_condition(reg), 3)
    assert c.s == (1, 1, 1, 1)
    with pytest.raises(ValueError):
        ma_grow_norm(empty_condition(reg), 3, donor="nope")


def test_no_donor_falls_back_to_alternation():
    reg = even_odd()
    c = ma_add_requirement(empty_condition(reg), "even", Fraction(1, 2))
    c = ma_add_requirement(c, "odd", Fraction(1, 2))
    with pytest.raises(NoDonor):
        ma_grow_norm(c, 10)
    c = ma_alternate_norm(c, 10)
    assert c.square_sum() > 10
    assert verify_condition(c).ok and brute_check(c)


def test_small_script():
    reg = even_odd()
    rep = diagonalize(reg, [ReqGoal("even", Fraction(1, 2)), ReqGoal("odd", Fraction(1, 2)), NormGoal(Fraction(10))])
    assert rep.ok
    assert [s.method for s in rep.steps] == ["rho", "rho", "alternate"]
    assert brute_check(rep.condition)


def test_side_mode_keeps_totals_zero():
    reg = Registry()
    reg.register(all_ones("x"))
    reg.register(harmonic_signs("z"))
    c = MACondition((Fraction(3), Fraction(6)), frozenset(), (), reg)
    out = ma_with_l2_side(c, ["z"], "x", Fraction(1, 2))
    assert verify_condition(out).side == {"z": 0}
    assert brute_check(out)
    bad = MACondition((Fraction(3), Fraction(-6)), frozenset(), (), reg)
    with pytest.raises(InvariantViolation):
        ma_with_l2_side(bad, ["z"], "x", Fraction(1, 2))
    with pytest.raises(NoDonor):
        ma_alternate_norm(out, 100)


def test_l2_requirement_needs_side_set():
    reg = Registry()
    reg.register(finite_seq("f", [1, 2]))
    reg.register(all_ones("x"))
    c = empty_condition(reg)
    assert "f" in c.H
    c = ma_add_requirement(c, "f", Fraction(1, 4))
    assert brute_check(c)


def test_unverifiable_pair_is_reported():
    reg = Registry()
    reg.register(residue_indicator("a", 2, 0))
    reg.register(residue_indicator("b", 3, 0))
    c = ma_add_requirement(empty_condition(reg), "a", Fraction(1, 2))
    # 2Z and 3Z meet, so no modulus certifies the pair
    with pytest.raises(Unverifiable):
        ma_add_requirement(c, "b", Fraction(1, 2))
    broken = MACondition(c.s + (Fraction(1),), c.F, c.P, reg)
    with pytest.raises(InvariantViolation):
        ma_add_requirement(broken, "b", Fraction(1, 2))


generators = {
    "ones": lambda: all_ones("ones"),
    "even": lambda: even_indicator("even"),
    "odd": lambda: odd_indicator("odd"),
    "r30": lambda: residue_indicator("r30", 3, 0),
    "r31": lambda: residue_indicator("r31", 3, 1),
}
compatible = [["even", "odd"], ["r30", "r31"], ["ones"]]


@given(
    st.sampled_from(compatible),
    st.lists(st.tuples(st.integers(0, 1), st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 3)])), min_size=1, max_size=3),
    st.integers(1, 6),
)
@settings(max_examples=25, deadline=None)
def test_random_scripts(names, reqs, norm):
    reg = Registry()
    for n in names:
        reg.register(generators[n]())
    goals = [ReqGoal(names[i % len(names)], eps) for i, eps in reqs] + [NormGoal(Fraction(norm))]
    rep = diagonalize(reg, goals)
    assert rep.ok
    assert rep.final.square_sum > norm
    assert brute_check(rep.condition)


def least_norm_oracle(vectors, targets):
    a = sympy.Matrix([[sym(Fraction(v)) for v in row] for row in vectors])
    b = sympy.Matrix([sym(Fraction(t)) for t in targets])
    return list(a.pinv() * b)


small = st.integers(-3, 3).map(Fraction)


@given(st.integers(1, 3).flatmap(lambda m: st.tuples(
    st.integers(m, 4).flatmap(lambda d: st.lists(st.lists(small, min_size=d, max_size=d), min_size=m, max_size=m)),
    st.lists(small, min_size=m, max_size=m),
)))
@settings(max_examples=60, deadline=None)
def test_solve_targets_least_norm(case):
    vectors, targets = case
    if sympy.Matrix(vectors).rank() < len(vectors):
        with pytest.raises(DependentVectors):
            solve_targets(vectors, targets)
        return
    sol = solve_targets(vectors, targets)
    assert all(r == 0 for r in sol.residuals)
    assert [sym(v) for v in sol.t] == least_norm_oracle(vectors, targets)
    assert sol.norm_sq == sum((v * v for v in sol.t), Fraction(0))
