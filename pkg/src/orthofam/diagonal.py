"""Finite-stage diagonalization: grow one rational row against finitely many
registered sequences so that checkpointed partial sums stay small.

A condition is a row ``s`` of length ``N``, a set ``F`` of sequence ids, and
requirements ``(x, k, eps)``: ``|sum_{n<k} s x| < eps`` and
``|sum_{k<=n<l} s x| < eps`` for every ``k < l <= N``.  Sequences in the
l2 side set ``H`` must in addition have exact total ``sum_{n<N} s z == 0``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, gcd, lcm
from typing import Callable, Iterable, Optional, Sequence, Union

from .exact import as_rat, half_power_below
from .linalg import DependentVectors, dot, gram, independence_relation, rank, solve
from .sequences import Unverifiable

# bound on window growth and tail tightening in side-condition mode
SIDE_RETRIES = 40
# bound on the number of entries the alternating fallback may append
MAX_STEPS = 10**6

Modulus = Callable[[Fraction], int]


class NoDonor(LookupError):
    pass


class InvariantViolation(AssertionError):
    pass


# -- registered sequences ----------------------------------------------------------


def scan_divergence(rule: Callable[[int], Fraction], limit: int = 10**7) -> Callable[[int, Fraction], int]:
    """Minimal ``N1`` with ``sum_{N0<=n<N1} x(n)**2 > bound`` found by scanning."""

    def witness(start: int, bound: Fraction) -> int:
        acc, n = Fraction(0), start
        while acc <= bound:
            if n - start > limit:
                raise Unverifiable("divergence scan exceeded its limit")
            acc += rule(n) ** 2
            n += 1
        return n

    return witness


@dataclass
class RegisteredSeq:
    id: str
    rule: Callable[[int], Fraction]
    in_l2: bool
    divergence: Optional[Callable[[int, Fraction], int]] = None
    kind: str = "custom"
    _cache: list = field(default_factory=list, repr=False)

    def __call__(self, n: int) -> Fraction:
        cache = self._cache
        while len(cache) <= n:
            cache.append(as_rat(self.rule(len(cache))))
        return cache[n]

    def values(self, start: int, stop: int) -> list[Fraction]:
        if stop > 0:
            self(stop - 1)
        return self._cache[start:stop]


@dataclass
class Registry:
    seqs: dict[str, RegisteredSeq] = field(default_factory=dict)
    moduli: dict[frozenset, Modulus] = field(default_factory=dict)

    def register(self, seq: RegisteredSeq) -> RegisteredSeq:
        if seq.id in self.seqs:
            raise ValueError(f"sequence {seq.id!r} already registered")
        if not seq.in_l2 and seq.divergence is None:
            seq.divergence = scan_divergence(seq)
        self.seqs[seq.id] = seq
        return seq

    def __getitem__(self, key: str) -> RegisteredSeq:
        if key not in self.seqs:
            raise KeyError(f"unregistered sequence {key!r}")
        return self.seqs[key]

    def __contains__(self, key: str) -> bool:
        return key in self.seqs

    def ids(self) -> list[str]:
        return list(self.seqs)

    def l2_ids(self) -> frozenset:
        return frozenset(k for k, v in self.seqs.items() if v.in_l2)

    def set_modulus(self, a: str, b: str, modulus: Modulus) -> None:
        self.moduli[frozenset((a, b))] = modulus

    def modulus(self, a: str, b: str) -> Modulus:
        key = frozenset((a, b))
        if key in self.moduli:
            return self.moduli[key]
        found = builtin_modulus(self[a], self[b])
        if found is None:
            raise Unverifiable(f"no convergence modulus for ({a}, {b})")
        return found


# built-in generators; ``kind`` drives the automatic moduli


def residue_indicator(ident: str, m: int, r: int) -> RegisteredSeq:
    if m < 1 or not 0 <= r < m:
        raise ValueError("need m >= 1 and 0 <= r < m")
    return RegisteredSeq(ident, lambda n: Fraction(int(n % m == r)), False, kind=f"residue:{m}:{r}")


def all_ones(ident: str) -> RegisteredSeq:
    return residue_indicator(ident, 1, 0)


def even_indicator(ident: str) -> RegisteredSeq:
    return residue_indicator(ident, 2, 0)


def odd_indicator(ident: str) -> RegisteredSeq:
    return residue_indicator(ident, 2, 1)


def harmonic_signs(ident: str) -> RegisteredSeq:
    """``(-1)**n / (n + 1)``: in l2, not in l1."""
    return RegisteredSeq(ident, lambda n: Fraction((-1) ** n, n + 1), True, kind="harmonic")


def finite_seq(ident: str, values: Sequence) -> RegisteredSeq:
    vals = [as_rat(v) for v in values]
    return RegisteredSeq(ident, lambda n: vals[n] if n < len(vals) else Fraction(0), True,
                         kind=f"finite:{len(vals)}")


def _residue(kind: str) -> Optional[tuple[int, int]]:
    if kind.startswith("residue:"):
        _, m, r = kind.split(":")
        return int(m), int(r)
    return None


def _alternating_modulus(eps: Fraction) -> int:
    # block sums of an alternating series with terms <= 1/(n+1) are below 1/(N'+1)
    return floor(1 / eps)


def builtin_modulus(a: RegisteredSeq, b: RegisteredSeq) -> Optional[Modulus]:
    ra, rb = _residue(a.kind), _residue(b.kind)
    if ra and rb:
        (ma, xa), (mb, xb) = ra, rb
        # residue classes intersect iff xa == xb mod gcd(ma, mb)
        if (xa - xb) % gcd(ma, mb) != 0:
            return lambda eps: 0
        return None
    for u, v in ((a, b), (b, a)):
        if u.kind == "harmonic" and _residue(v.kind) and _residue(v.kind)[0] % 2 == 1:
            return _alternating_modulus
        if u.kind.startswith("finite:"):
            end = int(u.kind.split(":")[1])
            return lambda eps, end=end: end
    return None


# -- conditions ----------------------------------------------------------------------


@dataclass(frozen=True)
class MARequirement:
    x: str
    k: int
    eps: Fraction


@dataclass(frozen=True)
class MACondition:
    s: tuple
    F: frozenset
    P: tuple
    registry: Registry = field(compare=False, repr=False)
    H: frozenset = frozenset()

    @property
    def N(self) -> int:
        return len(self.s)

    def square_sum(self) -> Fraction:
        return _memo(self, "square_sum", lambda: sum((v * v for v in self.s), Fraction(0)))

    def support(self) -> list[int]:
        return [n for n, v in enumerate(self.s) if v]


def empty_condition(registry: Registry) -> MACondition:
    h = registry.l2_ids()
    return MACondition((), h, (), registry, h)


@dataclass
class Checkpoint:
    requirement: MARequirement
    head: Fraction  # sum_{n<k} s x
    tail: Fraction  # sum_{k<=n<N} s x
    low: Fraction  # extremes of sum_{k<=n<l} over k < l <= N
    high: Fraction

    @property
    def extreme(self) -> Fraction:
        return max(abs(self.low), abs(self.high))

    @property
    def ok(self) -> bool:
        eps = self.requirement.eps
        return abs(self.head) < eps and self.extreme < eps

    @property
    def slack(self) -> Fraction:
        return self.requirement.eps - max(abs(self.head), abs(self.tail))


def _memo(c: MACondition, key: str, build: Callable):
    # conditions are immutable, so derived data can live on the instance
    cache = c.__dict__.setdefault("_memo", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def _scaled_products(c: MACondition, x: str) -> tuple[list[int], list[int], int]:
    """Support of ``s`` and the products ``s(n) x(n)`` over one common denominator."""
    idx = _memo(c, "support", c.support)
    vals = [c.s[n] for n in idx]
    seq = c.registry[x]
    ys = [seq(n) for n in idx]
    d1 = lcm(*(v.denominator for v in vals)) if vals else 1
    d2 = lcm(*(y.denominator for y in ys)) if ys else 1
    prods = [
        (v.numerator * (d1 // v.denominator)) * (y.numerator * (d2 // y.denominator))
        for v, y in zip(vals, ys)
    ]
    return idx, prods, d1 * d2


def checkpoint(c: MACondition, req: MARequirement) -> Checkpoint:
    idx, prods, den = _memo(c, f"prods:{req.x}", lambda: _scaled_products(c, req.x))
    head = tail = low = high = 0
    for n, p in zip(idx, prods):
        if n < req.k:
            head += p
        elif p:
            tail += p
            if tail < low:
                low = tail
            elif tail > high:
                high = tail
    return Checkpoint(req, Fraction(head, den), Fraction(tail, den), Fraction(low, den), Fraction(high, den))


def side_totals(c: MACondition) -> dict[str, Fraction]:
    out = {}
    for z in sorted(c.H):
        _, prods, den = _memo(c, f"prods:{z}", lambda z=z: _scaled_products(c, z))
        out[z] = Fraction(sum(prods), den)
    return out


@dataclass
class ConditionReport:
    checkpoints: list[Checkpoint]
    side: dict[str, Fraction]
    square_sum: Fraction

    @property
    def ok(self) -> bool:
        return all(cp.ok for cp in self.checkpoints) and all(v == 0 for v in self.side.values())


def verify_condition(c: MACondition) -> ConditionReport:
    """Recompute every requirement and side total from the row itself."""
    return _memo(c, "report", lambda: ConditionReport(
        [checkpoint(c, r) for r in c.P], side_totals(c), c.square_sum()))


def _checked(c: MACondition) -> MACondition:
    rep = verify_condition(c)
    if not rep.ok:
        bad = [cp.requirement for cp in rep.checkpoints if not cp.ok]
        side = {z: v for z, v in rep.side.items() if v}
        raise InvariantViolation(f"condition broken: requirements {bad}, side totals {side}")
    return c


def _eps0(c: MACondition, eps: Optional[Fraction] = None) -> Fraction:
    """Largest power of 1/2 strictly below every slack (and below ``eps``)."""
    bounds = [checkpoint(c, r).slack for r in c.P]
    if eps is not None:
        bounds.append(as_rat(eps))
    return half_power_below(min(bounds), cap=Fraction(1)) if bounds else Fraction(1)


def _inner_prefix(c: MACondition, x: str) -> Fraction:
    seq = c.registry[x]
    return sum((v * seq(n) for n, v in enumerate(c.s) if v), Fraction(0))


# -- least-norm solves --------------------------------------------------------------------


@dataclass
class TargetSolution:
    t: list[Fraction]
    coefficients: list[Fraction]
    norm_sq: Fraction
    residuals: list[Fraction]


def solve_targets(vectors: Sequence[Sequence], targets: Sequence) -> TargetSolution:
    """Least-norm ``t`` with ``(v_i, t) = beta_i``: ``t = sum c_i v_i`` and ``G c = beta``."""
    vs = [[as_rat(a) for a in v] for v in vectors]
    beta = [as_rat(b) for b in targets]
    if len(vs) != len(beta):
        raise ValueError("one target per vector")
    if not vs:
        return TargetSolution([], [], Fraction(0), [])
    width = len(vs[0])
    relation = independence_relation(vs)
    if relation is not None:
        raise DependentVectors(relation)
    coeffs = solve(gram(vs), beta)
    t = [sum((coeffs[i] * vs[i][j] for i in range(len(vs))), Fraction(0)) for j in range(width)]
    residuals = [dot(v, t) - b for v, b in zip(vs, beta)]
    return TargetSolution(t, coeffs, dot(beta, coeffs), residuals)


# -- extension steps ------------------------------------------------------------------------


def _rho_block(seq: RegisteredSeq, b: Fraction, start: int) -> list[Fraction]:
    """``rho * x`` on ``[start, N1)`` with ``N1`` minimal, cancelling ``b`` exactly."""
    if b == 0:
        return []
    end = seq.divergence(start, abs(b))
    vals = seq.values(start, end)
    total = sum((v * v for v in vals), Fraction(0))
    if total <= abs(b) or total - vals[-1] ** 2 > abs(b):
        raise Unverifiable(f"divergence witness for {seq.id} is not minimal at {end}")
    rho = -b / total
    block = [rho * v for v in vals]
    # running sum against x moves monotonically from b to 0
    run, prev = b, abs(b)
    for w, v in zip(block, vals):
        run += w * v
        if abs(run) > prev:
            raise InvariantViolation("rho block is not monotone")
        prev = abs(run)
    if run != 0:
        raise InvariantViolation("rho block does not cancel")
    return block


def _place(c: MACondition, x: str, eps0: Fraction, block_fn: Callable[[int], list[Fraction]]) -> list[Fraction]:
    """Append a block from ``block_fn(start)``; in side mode correct on a window first."""
    reg = c.registry
    partners = sorted(c.F - {x})
    if not c.H:
        start = max([c.N] + [reg.modulus(x, y)(eps0) for y in partners])
        return list(c.s) + [Fraction(0)] * (start - c.N) + block_fn(start)

    half = eps0 / 2
    n0 = max([c.N] + [reg.modulus(x, y)(half) for y in partners])
    zs = sorted(c.H)
    width, eta = len(zs), half
    watch = sorted((c.F | {x}))
    for _ in range(SIDE_RETRIES):
        window = range(n0, n0 + width)
        rows = {z: [reg[z](j) for j in window] for z in zs}
        basis: list[str] = []
        for z in zs:
            if rank([rows[w] for w in basis + [z]]) == len(basis) + 1:
                basis.append(z)
        start = max([n0 + width] + [reg.modulus(x, z)(eta) for z in zs])
        block = block_fn(start)
        beta = {z: sum((v * reg[z](start + i) for i, v in enumerate(block)), Fraction(0)) for z in zs}
        if basis:
            sol = solve_targets([rows[z] for z in basis], [-beta[z] for z in basis])
            t, t_sq = sol.t, sol.norm_sq
        else:
            t, t_sq = [Fraction(0)] * width, Fraction(0)
        if any(dot(rows[z], t) + beta[z] != 0 for z in zs):
            width *= 2  # window too short to separate the side set
            continue
        # Cauchy-Schwarz: the window moves any watched sum by at most ||t|| ||y|window||
        reach = max(sum((reg[y](j) ** 2 for j in window), Fraction(0)) for y in watch)
        if t_sq * reach < half * half:
            gap = [Fraction(0)] * (start - n0 - width)
            return list(c.s) + [Fraction(0)] * (n0 - c.N) + t + gap + block
        eta /= 4
    raise Unverifiable("side-condition correction did not settle within the retry bound")


def ma_add_requirement(c: MACondition, x: str, eps) -> MACondition:
    """Extend so that a requirement ``(x, k, eps)`` can be added."""
    reg, eps = c.registry, as_rat(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    _checked(c)
    seq = reg[x]
    if seq.in_l2:
        if x not in c.H:
            raise ValueError(f"{x} is in l2: register it in the side set instead")
        # the side total is exactly 0, so the requirement holds at once
        return _checked(dataclasses.replace(c, F=c.F | {x}, P=c.P + (MARequirement(x, c.N, eps),)))
    if c.H:
        return ma_with_l2_side(c, c.H, x, eps)
    eps0 = _eps0(c, eps)
    b = _inner_prefix(c, x)
    s = _place(c, x, eps0, lambda start: _rho_block(seq, b, start))
    new = dataclasses.replace(c, s=tuple(s), F=c.F | {x}, P=c.P + (MARequirement(x, len(s), eps),))
    return _checked(new)


def ma_with_l2_side(c: MACondition, H: Iterable[str], x: str, eps) -> MACondition:
    """Requirement step that keeps ``sum_{n<N} s z == 0`` for every ``z`` in ``H``."""
    reg, eps = c.registry, as_rat(eps)
    H = frozenset(H)
    for z in H:
        if not reg[z].in_l2:
            raise ValueError(f"side sequence {z} is not flagged l2")
    c = dataclasses.replace(c, H=c.H | H, F=c.F | H)
    if any(v != 0 for v in side_totals(c).values()):
        raise InvariantViolation("side-condition invariant fails before the step")
    seq = reg[x]
    if seq.in_l2:
        return ma_add_requirement(c, x, eps)
    eps0 = _eps0(c, eps)
    b = _inner_prefix(c, x)
    s = _place(c, x, eps0, lambda start: _rho_block(seq, b, start))
    new = dataclasses.replace(c, s=tuple(s), F=c.F | {x}, P=c.P + (MARequirement(x, len(s), eps),))
    return _checked(new)


def _donors(c: MACondition) -> list[str]:
    return [k for k in c.registry.ids() if not c.registry[k].in_l2 and k not in c.F]


def ma_grow_norm(c: MACondition, l, donor: Optional[str] = None) -> MACondition:
    """Copy an unconstrained non-l2 donor until ``sum s**2 > l``."""
    l = as_rat(l)
    _checked(c)
    need = l - c.square_sum()
    if need < 0:
        return c
    eligible = _donors(c)
    if donor is None:
        if not eligible:
            raise NoDonor("every non-l2 sequence is already constrained; register a donor")
        donor = eligible[0]
    elif donor not in eligible:
        raise ValueError(f"{donor} is not an eligible donor")
    seq = c.registry[donor]

    def block(start: int) -> list[Fraction]:
        return seq.values(start, seq.divergence(start, need))

    s = _place(c, donor, _eps0(c), block)
    return _checked(dataclasses.replace(c, s=tuple(s)))


def ma_alternate_norm(c: MACondition, l, x: Optional[str] = None) -> MACondition:
    """Grow ``sum s**2`` past ``l`` using a constrained non-l2 sequence.

    Single entries ``s(n) = d / x(n)`` move the running sum against ``x`` by
    ``d``, alternating between ``+a`` and ``-a`` inside every slack of ``x``'s
    requirements; other partners move by amounts bounded through their moduli.
    """
    if c.H:
        raise NoDonor("alternating growth is not available with an l2 side set")
    l, reg = as_rat(l), c.registry
    _checked(c)
    total = c.square_sum()
    if total > l:
        return c
    if x is None:
        cands = [k for k in reg.ids() if not reg[k].in_l2]
        if not cands:
            raise NoDonor("no non-l2 sequence registered")
        x = cands[0]
    seq = reg[x]
    own = [checkpoint(c, r) for r in c.P if r.x == x]
    others = [checkpoint(c, r) for r in c.P if r.x != x]
    bound = min([cp.requirement.eps - abs(cp.tail) for cp in own], default=Fraction(1))
    a = half_power_below(bound, cap=Fraction(1))
    slack = {i: cp.slack for i, cp in enumerate(others)}
    tails = {i: cp.tail for i, cp in enumerate(others)}
    partners = sorted({cp.requirement.x for cp in others})
    s = list(c.s)
    n, pos, steps = c.N, Fraction(0), 0
    last_room = eta = None
    while total <= l:
        steps += 1
        if steps > MAX_STEPS:
            raise Unverifiable("alternating growth exceeded its step bound")
        while not seq(n):
            n += 1
        d = -2 * a if pos > 0 else (2 * a if pos < 0 else a)
        xn = seq(n)
        if partners:
            room = min(slack.values())
            if room != last_room:
                eta, last_room = half_power_below(room / 2, cap=Fraction(1)), room
            coef = abs(d) / (xn * xn)
            need = max(reg.modulus(x, y)(eta / coef) for y in partners)
            if need > n:
                n = need
                continue
        v = d / xn
        s += [Fraction(0)] * (n - len(s)) + [v]
        for i, cp in enumerate(others):
            yn = reg[cp.requirement.x](n)
            if yn:
                tails[i] += v * yn
                slack[i] = cp.requirement.eps - max(abs(cp.head), abs(tails[i]))
        pos += d
        total += v * v
        n += 1
    return _checked(dataclasses.replace(c, s=tuple(s)))


# -- goals ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class ReqGoal:
    x: str
    eps: Fraction


@dataclass(frozen=True)
class NormGoal:
    l: Fraction


Goal = Union[ReqGoal, NormGoal]


@dataclass
class StepRecord:
    goal: Goal
    method: str
    length: int
    square_sum: Fraction


@dataclass
class DiagonalReport:
    condition: MACondition
    steps: list[StepRecord]
    final: ConditionReport
    goals_met: list[bool]

    @property
    def row(self) -> tuple:
        return self.condition.s

    @property
    def ok(self) -> bool:
        return self.final.ok and all(self.goals_met)


def diagonalize(registry: Registry, goals: Sequence[Goal]) -> DiagonalReport:
    """Apply one extension per goal, in order, re-verifying after every step."""
    c = empty_condition(registry)
    steps = []
    for g in goals:
        if isinstance(g, ReqGoal):
            c = ma_add_requirement(c, g.x, g.eps)
            method = "side" if c.H else "rho"
        elif isinstance(g, NormGoal):
            try:
                c = ma_grow_norm(c, g.l)
                method = "donor"
            except NoDonor:
                c = ma_alternate_norm(c, g.l)
                method = "alternate"
        else:
            raise TypeError(f"unknown goal {g!r}")
        steps.append(StepRecord(g, method, c.N, c.square_sum()))
    final = verify_condition(c)
    met = []
    for g in goals:
        if isinstance(g, ReqGoal):
            met.append(any(cp.requirement.x == g.x and cp.requirement.eps == g.eps and cp.ok
                           for cp in final.checkpoints))
        else:
            met.append(final.square_sum > g.l)
    return DiagonalReport(c, steps, final, met)
