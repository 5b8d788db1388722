"""Sign conditions, their extension steps, and the staged full-support build.

A condition is an ``h x N`` matrix of nonzero rationals together with
requirements ``(i, j, k, eps)``: the pair's partial sum up to ``k`` and every
later partial sum taken from ``k`` stay strictly below ``eps`` in magnitude.

Columns are stored as segments.  A padding segment is one block repeated a
(possibly astronomically large) number of times; every row pair has zero total
over the block, so a single copy determines all partial-sum extremes.
"""

from __future__ import annotations

import dataclasses
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional, Sequence

import numpy as np
from gmpy2 import mpz

from .exact import Radical, as_rat, half_power_below
from .sequences import FullSupport, InnerCertificate, OutOfRange, SeqHandle

# tiny entries keep every product below this fraction of the current slack
TINY_MARGIN = Fraction(1, 2**10)
# widest Hadamard block used for padding; wider conditions use the h x h block
HADAMARD_MAX_ROWS = 8


class ConditionError(ValueError):
    pass


def _square_below(bound: Fraction) -> Fraction:
    """Largest power of 1/2 (at most 1/2) whose square is strictly below ``bound``."""
    t = Fraction(1, 2)
    while t * t >= bound:
        t /= 2
    return t


@dataclass(frozen=True)
class Requirement:
    i: int
    j: int
    k: int
    eps: Fraction
    base: Fraction  # partial sum of the pair below k when recorded

    def key(self):
        return (self.i, self.j, self.k, self.eps)


@dataclass(frozen=True)
class Segment:
    """``times`` consecutive copies of ``block`` (a tuple of columns)."""

    block: tuple[tuple[Fraction, ...], ...]
    times: int = 1
    stage: int = 0
    kind: str = "column"  # column | hadamard | alt

    @property
    def width(self) -> int:
        return len(self.block)

    @property
    def length(self) -> int:
        return self.width * self.times


class GramModel:
    """Pair sums stored as ``T + R[a] + R[b] + D[a, b]``.

    A column equal to ``tau`` except at a few rows updates ``T``, two entries
    of ``R`` and a handful of ``D`` entries, so a step costs O(1) instead of
    ``O(h**2)``.  Treat instances as immutable; ``copy`` before mutating.
    """

    def __init__(self, h: int, T=Fraction(0), R=None, D=None):
        self.h = h
        self.T = T
        self.R = list(R) if R is not None else [Fraction(0)] * h
        self.D = dict(D) if D is not None else {}

    def copy(self) -> "GramModel":
        return GramModel(self.h, self.T, self.R, self.D)

    def get(self, a: int, b: int) -> Fraction:
        key = (a, b) if a <= b else (b, a)
        return self.T + self.R[a] + self.R[b] + self.D.get(key, Fraction(0))

    def _bump(self, key, v):
        if v:
            self.D[key] = self.D.get(key, Fraction(0)) + v

    def add_structured(self, tau: Fraction, exceptions: dict, times: int = 1) -> None:
        """Add ``times`` copies of the column ``tau`` with ``exceptions[row]`` overrides."""
        self.T += times * tau * tau
        diffs = sorted((r, v - tau) for r, v in exceptions.items())
        for r, d in diffs:
            self.R[r] += times * tau * d
        for x, (r, d) in enumerate(diffs):
            for q, e in diffs[x:]:
                self._bump((r, q), times * d * e)

    def add_block(self, block, times: int = 1) -> None:
        """Add ``times`` copies of a block of full columns."""
        acc: dict = {}
        for col in block:
            nz = [(r, v) for r, v in enumerate(col) if v]
            for x, (r, v) in enumerate(nz):
                for q, w in nz[x:]:
                    acc[(r, q)] = acc.get((r, q), Fraction(0)) + v * w
        for key, v in acc.items():
            self._bump(key, times * v)

    def doubled(self) -> "GramModel":
        R = [v for v in self.R for _ in (0, 1)]
        D = {}
        for (a, b), v in self.D.items():
            if a == b:
                keys = [(2 * a, 2 * a), (2 * a, 2 * a + 1), (2 * a + 1, 2 * a + 1)]
            else:
                keys = [(2 * a + x, 2 * b + y) for x in (0, 1) for y in (0, 1)]
            for k in keys:
                D[k] = v
        return GramModel(2 * self.h, self.T, R, D)


@dataclass(frozen=True)
class SignCondition:
    h: int
    segments: tuple[Segment, ...] = ()
    requirements: tuple[Requirement, ...] = ()
    gram_model: Optional[GramModel] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "SignCondition":
        rows = [[as_rat(v) for v in r] for r in rows]
        h = len(rows)
        if h == 0:
            raise ConditionError("a condition needs at least one row")
        n = len(rows[0])
        if any(len(r) != n for r in rows):
            raise ConditionError("rows must have equal length")
        cols = tuple(tuple(r[c] for r in rows) for c in range(n))
        return cls(h, tuple(Segment((c,), 1, 0) for c in cols), ())

    @property
    def gram(self) -> GramModel:
        if self.gram_model is None:
            g = GramModel(self.h)
            for seg in self.segments:
                g.add_block(seg.block, seg.times)
            object.__setattr__(self, "gram_model", g)
        return self.gram_model

    @property
    def N(self) -> int:
        n = self.__dict__.get("_n")
        if n is None:
            n = sum(s.length for s in self.segments)
            object.__setattr__(self, "_n", n)
        return n

    def pair_sum(self, i: int, j: int) -> Fraction:
        return self.gram.get(i, j)

    def starts(self) -> list[int]:
        out, n = [], 0
        for s in self.segments:
            out.append(n)
            n += s.length
        return out

    def entry(self, i: int, m: int) -> Fraction:
        starts = self.starts()
        if m < 0 or m >= self.N:
            raise OutOfRange(f"column {m} outside [0, {self.N})")
        s = bisect_right(starts, m) - 1
        seg = self.segments[s]
        return seg.block[(m - starts[s]) % seg.width][i]

    def explicit_columns(self) -> list[tuple[Fraction, ...]]:
        """Every column, with repeated blocks expanded; only for small conditions."""
        out = []
        for seg in self.segments:
            out.extend(list(seg.block) * seg.times)
        return out

    def row(self, i: int) -> list[Fraction]:
        return [c[i] for c in self.explicit_columns()]

    def slack(self, r: Requirement) -> Fraction:
        tail = self.pair_sum(r.i, r.j) - r.base
        return r.eps - max(abs(tail), abs(r.base))

    def min_slack(self) -> Optional[Fraction]:
        if not self.requirements:
            return None
        return min(self.slack(r) for r in self.requirements)

    def append(self, segment: Segment, new_reqs=()) -> "SignCondition":
        g = self.gram.copy()
        g.add_block(segment.block, segment.times)
        return SignCondition(self.h, self.segments + (segment,), self.requirements + tuple(new_reqs), g)


# -- the three extension steps ------------------------------------------------------

class PairStepper:
    """Runs many ``require_pair`` steps with a certified running slack bound.

    ``floor`` is a lower bound on every requirement's slack.  A new column
    moves each requirement's tail by at most ``mu``, except those of the target
    pair, whose tail collapses to ``-base``; so ``floor - mu`` stays valid.
    """

    def __init__(self, cond: SignCondition, stage: int = 0):
        self.h = cond.h
        self.stage = stage
        self.segments = list(cond.segments)
        self.requirements = list(cond.requirements)
        self.gram = cond.gram.copy()
        self.N = cond.N
        self.floor = cond.min_slack()

    @property
    def cond(self) -> SignCondition:
        return SignCondition(self.h, tuple(self.segments), tuple(self.requirements), self.gram.copy())

    def require(self, i: int, j: int, eps) -> None:
        eps = as_rat(eps)
        if i == j or not (0 <= i < self.h and 0 <= j < self.h):
            raise ConditionError(f"bad row pair {{{i}, {j}}}")
        if eps <= 0:
            raise ConditionError("eps must be positive")
        i, j = min(i, j), max(i, j)
        b = self.gram.get(i, j)
        room = eps if self.floor is None else min(self.floor, eps)
        if b != 0:
            tau = half_power_below(room * TINY_MARGIN / max(abs(b), 1), strict=False)
            special = {i: b, j: Fraction(-1)}
            mu = max(abs(b) * tau, tau)
            new_base = Fraction(0)
        else:
            sigma = half_power_below(room * TINY_MARGIN, strict=False)
            while sigma * sigma > room * TINY_MARGIN:
                sigma /= 2
            tau = sigma
            special = {i: sigma, j: sigma}
            mu = sigma * sigma
            new_base = sigma * sigma
        col = [tau] * self.h
        for r, v in special.items():
            col[r] = v
        self.N += 1
        self.segments.append(Segment((tuple(col),), 1, self.stage))
        self.requirements.append(Requirement(i, j, self.N, eps, new_base))
        self.gram.add_structured(tau, special)
        slack_new = eps - abs(new_base)
        self.floor = slack_new if self.floor is None else min(self.floor - mu, slack_new)


def require_pair(c: SignCondition, i: int, j: int, eps, stage: int = 0) -> SignCondition:
    """Append one column making the pair's running sum vanish (or stay tiny)."""
    stepper = PairStepper(c, stage=stage)
    stepper.require(i, j, eps)
    return stepper.cond


def hadamard_block(h: int) -> list[list[int]]:
    """``h x 2**h`` sign matrix; row ``i`` is -1 exactly where bit ``i`` of the column is set."""
    if h < 1:
        raise ValueError("h must be positive")
    return [[-1 if (t >> i) & 1 else 1 for t in range(2**h)] for i in range(h)]


def alt_pad_columns(h: int, eps) -> list[list[Fraction]]:
    """``-d`` on the diagonal and ``eps`` elsewhere, ``d = (h-2) eps / 2``."""
    eps = as_rat(eps)
    if h <= 2:
        raise ValueError("the diagonal weight (h-2)eps/2 must be positive, so h >= 3")
    d = (h - 2) * eps / 2
    return [[-d if r == c else eps for c in range(h)] for r in range(h)]


@dataclass(frozen=True)
class PadInfo:
    start: int
    stop: int
    eps: Fraction
    delta: Fraction
    repeats: int
    kind: str
    block_width: int


def pad_block(c: SignCondition, l: int, stage: int = 0) -> tuple[SignCondition, PadInfo]:
    """Append repeated orthogonal blocks with entries of size ``eps`` until
    ``(added columns) * eps**l > 1``."""
    if l < 1:
        raise ValueError("l must be positive")
    slack = c.min_slack()
    delta = Fraction(1, 2) if slack is None else _square_below(slack)
    h = c.h
    if h <= HADAMARD_MAX_ROWS:
        eps = delta / 2**h
        signs = hadamard_block(h)
        block = tuple(tuple(eps * signs[i][t] for i in range(h)) for t in range(2**h))
        kind = "hadamard"
    else:
        # one copy moves a pair's partial sum by at most 2(h-2)eps**2 < delta**2
        e = 0
        while 4**e < 2 * h:
            e += 1
        eps = delta / 2**e
        m = alt_pad_columns(h, eps)
        block = tuple(tuple(m[r][col] for r in range(h)) for col in range(h))
        kind = "alt"
    width = len(block)
    smallest = min(abs(v) for col in block for v in col)
    # minimal M with M * width * smallest**l > 1
    need = 1 / (width * smallest**l)
    repeats = need.numerator // need.denominator + 1
    start = c.N
    out = c.append(Segment(block, repeats, stage, kind))
    return out, PadInfo(start, out.N, eps, delta, repeats, kind, width)


def double(c: SignCondition) -> SignCondition:
    segs = tuple(
        dataclasses.replace(s, block=tuple(tuple(v for v in col for _ in (0, 1)) for col in s.block))
        for s in c.segments
    )
    reqs = []
    for r in c.requirements:
        reqs.append(Requirement(2 * r.i, 2 * r.j, r.k, r.eps, r.base))
        reqs.append(Requirement(2 * r.i + 1, 2 * r.j + 1, r.k, r.eps, r.base))
    return SignCondition(2 * c.h, segs, tuple(reqs), c.gram.doubled())


# -- verification ---------------------------------------------------------------------

@dataclass
class Violation:
    what: str
    requirement: Optional[Requirement] = None
    value: Optional[Fraction] = None


def _common_entry(col: Sequence[Fraction]) -> Fraction:
    """An entry occurring in more than half of ``col`` if one of the first three does,
    else the most frequent entry."""
    half = len(col) // 2
    for v in col[:3]:
        if col.count(v) > half:
            return v
    counts: dict = {}
    for v in col:
        counts[v] = counts.get(v, 0) + 1
    return max(counts, key=lambda v: (counts[v], -col.index(v)))


class _RunScan:
    """Running pair sums over one stage's segments, computed per row class.

    Rows identical on the run share a class.  Each single column is split into
    a default value ``tau`` (its most common entry) and a few exception rows.
    For a row pair the running sum is ``sum tau**2`` (nondecreasing) plus
    corrections at the columns where either row is exceptional, so its extremes
    over any index range are attained at those columns, their predecessors,
    or the range ends.  A repeated block is one step whose inner extremes come
    from a single copy, shifted by the block total per copy.
    """

    def __init__(self, segs: list[Segment], start: int, h: int):
        self.start = start
        den = lcm(*{v.denominator for sgm in segs for col in sgm.block for v in col})
        self.den = den
        self.den2 = den * den
        as_int = lambda v: mpz(v.numerator * (den // v.denominator))
        # chunks: ("plain", start, tau ints, cumulative tau**2, exceptions) or ("block", start, segment ints, times)
        self.chunks: list = []
        self.exc_cols: list[dict[int, list[int]]] = []
        pos = start
        plain: list = []

        def flush():
            nonlocal plain
            if not plain:
                return
            p0 = pos - len(plain)
            taus, excs, by_row = [], [], {}
            for t, col in enumerate(plain):
                tau = _common_entry(col)
                e = {r: as_int(v) for r, v in enumerate(col) if v is not tau and v != tau}
                for r in e:
                    by_row.setdefault(r, []).append(t)
                taus.append(as_int(tau))
                excs.append(e)
            cum = np.cumsum(np.array([t * t for t in taus], dtype=object))
            self.chunks.append(("plain", p0, taus, cum, excs, by_row))
            plain = []

        for sgm in segs:
            if sgm.times == 1 and sgm.width == 1:
                plain.append(sgm.block[0])
                pos += 1
            else:
                flush()
                cols = [[as_int(v) for v in col] for col in sgm.block]
                self.chunks.append(("block", pos, cols, sgm.times))
                pos += sgm.length
        flush()
        self.end = pos
        sig: dict = {}
        self.cls = []
        # rows built from the same entry objects share a class; equal rows made of
        # distinct objects merely get separate classes, which costs time, not soundness
        for i in range(h):
            key = tuple(id(col[i]) for sgm in segs for col in sgm.block)
            self.cls.append(sig.setdefault(key, len(sig)))
        self.rep = {}
        for i, c in enumerate(self.cls):
            self.rep.setdefault(c, i)

    def scan(self, ca: int, cb: int, queries: Sequence[int] = ()):
        """Total, min and max over the run of the running sum (0 at the start),
        and for each query ``k``: the value at ``k`` and the min/max over ``(k, end]``."""
        a, b = self.rep[ca], self.rep[cb]
        # key steps as parallel arrays: end index, value, low, high
        e_parts, v_parts, lo_parts, hi_parts = [], [], [], []
        run = 0
        qs = sorted(queries)
        for chunk in self.chunks:
            if chunk[0] == "plain":
                _, p0, taus, cum, excs, by_row = chunk
                m = len(taus)
                ra, rb = by_row.get(a, ()), by_row.get(b, ())
                events = np.array(sorted(set(ra) | set(rb)), dtype=np.int64)
                extra = [0, m - 1]
                for k in qs:
                    t = k - p0 - 1
                    extra += [u for u in (t, t + 1) if 0 <= u < m]
                pts = np.union1d(np.union1d(events, events[events > 0] - 1), np.array(extra, dtype=np.int64))
                corr = [0]
                for c in events.tolist():
                    tau, ex = taus[c], excs[c]
                    corr.append(ex.get(a, tau) * ex.get(b, tau) - tau * tau)
                dcum = np.cumsum(np.array(corr, dtype=object))
                idx = np.searchsorted(events, pts, side="right")
                vals = cum[pts] + dcum[idx] + run
                e_parts.append([p0 + int(t) + 1 for t in pts])
                v_parts.append(vals)
                lo_parts.append(vals)
                hi_parts.append(vals)
                run = run + cum[m - 1] + dcum[-1]
            else:
                _, p0, cols, times = chunk
                pref, acc = [], 0
                for col in cols:
                    acc += col[a] * col[b]
                    pref.append(acc)
                lo, hi = min(min(pref), 0), max(max(pref), 0)
                shift = (times - 1) * acc
                e_parts.append([p0 + len(cols) * times])
                v_parts.append(np.array([run + times * acc], dtype=object))
                lo_parts.append(np.array([run + min(lo, lo + shift)], dtype=object))
                hi_parts.append(np.array([run + max(hi, hi + shift)], dtype=object))
                run = run + times * acc
        keys = e_parts
        f = lambda v: Fraction(int(v), self.den2)
        if not keys:
            return Fraction(0), Fraction(0), Fraction(0), [None if k != self.start else (0, 0, 0) for k in qs]
        ends = [e for part in e_parts for e in part]
        vals = np.concatenate(v_parts)
        suf_lo = np.minimum.accumulate(np.concatenate(lo_parts)[::-1])[::-1]
        suf_hi = np.maximum.accumulate(np.concatenate(hi_parts)[::-1])[::-1]
        n = len(ends)
        block_spans = [(c[1], c[1] + len(c[2]) * c[3]) for c in self.chunks if c[0] == "block"]
        answers = []
        for k in qs:
            if any(s0 < k < s1 for s0, s1 in block_spans):
                answers.append(None)
                continue
            if k == self.start:
                at = 0
            else:
                q = bisect_right(ends, k) - 1
                if q < 0 or ends[q] != k:
                    answers.append(None)
                    continue
                at = vals[q]
            q = bisect_right(ends, k)
            if q < n:
                answers.append((f(at), f(suf_lo[q]), f(suf_hi[q])))
            else:
                answers.append((f(at), f(at), f(at)))
        return f(run), f(min(suf_lo[0], 0)), f(max(suf_hi[0], 0)), answers


def verify_condition(c: SignCondition) -> list[Violation]:
    """Exact check of nonzero entries and every requirement at every index."""
    bad: list[Violation] = []
    for sx, seg in enumerate(c.segments):
        if seg.times < 1:
            bad.append(Violation(f"segment {sx} has no copies"))
        for col in seg.block:
            if len(col) != c.h:
                bad.append(Violation(f"segment {sx} has a column of height {len(col)}"))
                return bad
            for i, v in enumerate(col):
                if v == 0:
                    bad.append(Violation(f"zero entry in row {i}, segment {sx}"))
    runs: list[tuple[int, list[Segment]]] = []
    pos = 0
    for seg in c.segments:
        if not runs or runs[-1][1][-1].stage != seg.stage:
            runs.append((pos, []))
        runs[-1][1].append(seg)
        pos += seg.length
    scans = [_RunScan(segs, start, c.h) for start, segs in runs]
    starts = [sc.start for sc in scans]
    reqs = []
    for r in c.requirements:
        if not (0 <= r.i < c.h and 0 <= r.j < c.h) or r.i == r.j:
            bad.append(Violation("requirement names a bad pair", r))
        elif not (0 <= r.k <= c.N):
            bad.append(Violation("checkpoint outside the condition", r))
        else:
            reqs.append(r)
    if not scans:
        for r in reqs:
            if r.eps <= 0:
                bad.append(Violation("head sum too large", r, Fraction(0)))
        return bad

    def run_of(k: int) -> int:
        return max(bisect_right(starts, k) - 1, 0)

    # gather every (run, class pair) and the checkpoints queried there
    queries: dict = {}
    pairs = sorted({(r.i, r.j) for r in reqs})
    for i, j in pairs:
        for e, sc in enumerate(scans):
            queries.setdefault((e, sc.cls[i], sc.cls[j]), set())
    for r in reqs:
        e = run_of(r.k)
        queries[(e, scans[e].cls[r.i], scans[e].cls[r.j])].add(r.k)
    results: dict = {}
    for (e, ca, cb), ks in queries.items():
        ks = sorted(ks)
        tot, lo, hi, ans = scans[e].scan(ca, cb, ks)
        results[(e, ca, cb)] = (tot, lo, hi, dict(zip(ks, ans)))
    for r in reqs:
        i, j = r.i, r.j
        prefix, acc = [], Fraction(0)
        for e, sc in enumerate(scans):
            prefix.append(acc)
            acc += results[(e, sc.cls[i], sc.cls[j])][0]
        e = run_of(r.k)
        sc = scans[e]
        got = results[(e, sc.cls[i], sc.cls[j])][3][r.k]
        if got is None:
            bad.append(Violation("checkpoint inside a repeated block", r))
            continue
        rel_at, rel_lo, rel_hi = got
        at, lo, hi = prefix[e] + rel_at, prefix[e] + rel_lo, prefix[e] + rel_hi
        for f in range(e + 1, len(scans)):
            _, glo, ghi, _ = results[(f, scans[f].cls[i], scans[f].cls[j])]
            lo, hi = min(lo, prefix[f] + glo), max(hi, prefix[f] + ghi)
        if abs(at) >= r.eps:
            bad.append(Violation("head sum too large", r, at))
        worst = max(abs(hi - at), abs(lo - at))
        if worst >= r.eps:
            bad.append(Violation("tail sum too large", r, worst))
        if at != r.base:
            bad.append(Violation("recorded base differs from the partial sum", r, at - r.base))
    return bad


# -- the staged build ---------------------------------------------------------------------

@dataclass
class StageRecord:
    stage: int
    h: int
    eps: Fraction
    columns_before: int
    columns_after_pairs: int
    pad: PadInfo
    columns_after: int  # N^{p_n} before doubling


@dataclass
class FullSupportBuild:
    h0: int
    seed: list[list[Fraction]]
    stages: list[StageRecord]
    condition: SignCondition
    snapshots: list[SignCondition] = field(default_factory=list)

    def leaves(self) -> list[SeqHandle]:
        return [row_handle(self.condition, i) for i in range(self.condition.h)]


def default_seed(h0: int) -> list[list[Fraction]]:
    return [[Fraction(i + 1)] for i in range(h0)]


def build_perfect_family(h0: int = 2, seed: Optional[Sequence[Sequence]] = None, stages: int = 3,
                         keep_snapshots: bool = False) -> FullSupportBuild:
    seed_rows = [[as_rat(v) for v in r] for r in (seed if seed is not None else default_seed(h0))]
    if len(seed_rows) != h0:
        raise ConditionError("seed must have h0 rows")
    cond = SignCondition.from_rows(seed_rows)
    if any(v == 0 for r in seed_rows for v in r):
        raise ConditionError("seed entries must be nonzero")
    records, snaps = [], []
    for n in range(1, stages + 1):
        eps = Fraction(1, n)
        before = cond.N
        stepper = PairStepper(cond, stage=n)
        for i in range(cond.h):
            for j in range(i + 1, cond.h):
                stepper.require(i, j, eps)
        cond = stepper.cond
        after_pairs = cond.N
        cond, pad = pad_block(cond, n, stage=n)
        records.append(StageRecord(n, cond.h, eps, before, after_pairs, pad, cond.N))
        if keep_snapshots:
            snaps.append(cond)
        cond = double(cond)
    return FullSupportBuild(h0, seed_rows, records, cond, snaps)


def height_series(build: FullSupportBuild, p: int) -> tuple[Fraction, int, bool]:
    """Exact ``sum_n min_i |s_i(n)|**p`` with the number of qualifying stages.

    Returns ``(sum, stages with p <= l, sum >= that count)``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    total = Fraction(0)
    for seg in build.condition.segments:
        block = sum((min(abs(v) for v in col) ** p for col in seg.block), Fraction(0))
        total += block * seg.times
    qualifying = sum(1 for rec in build.stages if p <= rec.stage)
    return total, qualifying, total >= qualifying


def padded_range_sum(build: FullSupportBuild, stage: int, p: int) -> Fraction:
    rec = build.stages[stage - 1]
    smallest = min(abs(v) for v in alt_or_hadamard_entries(rec))
    return rec.pad.repeats * rec.pad.block_width * smallest**p


def alt_or_hadamard_entries(rec: StageRecord) -> list[Fraction]:
    if rec.pad.kind == "hadamard":
        return [rec.pad.eps]
    return [rec.pad.eps, (rec.h - 2) * rec.pad.eps / 2]


def row_handle(c: SignCondition, i: int) -> SeqHandle:
    starts = c.starts()

    def rule(m: int) -> Radical:
        s = bisect_right(starts, m) - 1
        seg = c.segments[s]
        return Radical.of(seg.block[(m - starts[s]) % seg.width][i])

    return SeqHandle(f"row:{i}", rule, FullSupport(), in_l2=False, length=c.N, meta={"condition": c, "row": i})


def pair_certificate(c: SignCondition, i: int, j: int) -> InnerCertificate:
    """Checkpointed sums of a pair; the tail bound is its tightest requirement."""
    i, j = min(i, j), max(i, j)
    reqs = [r for r in c.requirements if (r.i, r.j) == (i, j)]
    if not reqs:
        raise ConditionError(f"no requirement on pair ({i}, {j})")
    best = min(reqs, key=lambda r: (r.eps, -r.k))
    return InnerCertificate(
        "partial", sums=[(best.k, best.base), (c.N, c.pair_sum(i, j))], tail_bound=best.eps
    )


# -- restoring orthogonality ----------------------------------------------------------------

@dataclass(frozen=True)
class AdSupportCondition:
    """Rows with entries 0 or of size >= 1 and promises of later disjointness."""

    rows: tuple[tuple[Fraction, ...], ...]
    promises: tuple[frozenset, ...]  # promises[a] = {(b, n), ...}
    labels: tuple[int, ...] = ()

    @classmethod
    def of(cls, rows, promises=None, labels=None) -> "AdSupportCondition":
        rows = tuple(tuple(as_rat(v) for v in r) for r in rows)
        proms = tuple(frozenset(p) for p in (promises or [()] * len(rows)))
        labs = tuple(labels) if labels is not None else tuple(range(len(rows)))
        return cls(rows, proms, labs)

    @property
    def N(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def inner(self, a: int, b: int) -> Fraction:
        return sum((x * y for x, y in zip(self.rows[a], self.rows[b])), Fraction(0))

    def problems(self, require_orthogonal: bool = True) -> list[str]:
        out = []
        pos = {lab: a for a, lab in enumerate(self.labels)}
        for a, r in enumerate(self.rows):
            if len(r) != self.N:
                out.append(f"row {self.labels[a]} has length {len(r)}")
            for v in r:
                if v != 0 and abs(v) < 1:
                    out.append(f"row {self.labels[a]} has entry {v} of size below 1")
            for lab, n in self.promises[a]:
                b = pos.get(lab)
                if b is None:
                    out.append(f"promise of row {self.labels[a]} names unknown row {lab}")
                    continue
                for m in range(n, self.N):
                    if self.rows[a][m] != 0 and self.rows[b][m] != 0:
                        out.append(f"promise ({lab}, {n}) of row {self.labels[a]} broken at {m}")
                        break
        if require_orthogonal:
            for a in range(len(self.rows)):
                for b in range(a + 1, len(self.rows)):
                    v = self.inner(a, b)
                    if v != 0:
                        out.append(f"rows {self.labels[a]}, {self.labels[b]} have inner product {v}")
        return out


def restoring_pair(x: Fraction) -> tuple[Fraction, Fraction]:
    """Smallest integer ``u >= 2`` with ``|x + u| >= 1`` and ``v = -x - u``."""
    u = 2
    while abs(x + u) < 1:
        u += 1
    return Fraction(u), -x - u


def extend_to_orthogonal(pre: AdSupportCondition) -> AdSupportCondition:
    rows = [list(r) for r in pre.rows]
    pos = {lab: a for a, lab in enumerate(pre.labels)}
    bad = [(a, b) for a in range(len(rows)) for b in range(a + 1, len(rows)) if pre.inner(a, b) != 0]
    for a, b in bad:
        la, lb = pre.labels[a], pre.labels[b]
        for src, other in ((a, lb), (b, la)):
            if any(lab == other for lab, _ in pre.promises[src]):
                raise ConditionError(
                    f"weak orthogonality fails: rows {la}, {lb} are not orthogonal but row "
                    f"{pre.labels[src]} carries a promise about row {other}"
                )
    for a, b in bad:
        x = sum((p * q for p, q in zip(rows[a], rows[b])), Fraction(0))
        u, v = restoring_pair(x)
        for r, row in enumerate(rows):
            if r == a:
                row += [Fraction(1), Fraction(1)]
            elif r == b:
                row += [u, v]
            else:
                row += [Fraction(0), Fraction(0)]
    del pos
    return AdSupportCondition(tuple(tuple(r) for r in rows), pre.promises, pre.labels)
