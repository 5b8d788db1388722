"""Family files: a JSON document with a spec header and exact payload.

Every scalar is written as ``{"num", "den", "radicand"}`` strings.  Verifying
a file runs the family's certificate checks on the file's own data and then
compares the payload with a fresh regeneration, reporting the first exact
residual.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Optional

from . import comb, fullsupport, kunen, l2fam
from .exact import (
    Radical,
    RadicalSum,
    decode_radical,
    decode_rat,
    encode_radical,
    encode_rat,
)
from .linalg import nullspace, rank_radical
from .sequences import PrefixVec

FORMAT = "orthofam-family"
VERSION = 1
KINDS = ("comb", "comb-full-support", "kunen", "fullsupport", "l2tree", "staircase", "grid")
DEFAULT_DEPTH = {
    "comb": 2,
    "comb-full-support": 8,
    "kunen": 6,
    "fullsupport": 3,
    "l2tree": 8,
    "staircase": 7,
    "grid": 5,
}
# materialized comb prefixes stop at the last level starting below this index
PREFIX_CAP = 4096
SAMPLE_SEED = 0


class SpecError(ValueError):
    """Invalid family parameters (a usage error)."""


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    depth: int
    params: dict = field(default_factory=dict)

    def validate(self) -> "FamilySpec":
        if self.kind not in KINDS:
            raise SpecError(f"unknown family kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        lo = {"comb": 1, "comb-full-support": 2, "staircase": 2, "fullsupport": 1}.get(self.kind, 1)
        if not isinstance(self.depth, int) or self.depth < lo:
            raise SpecError(f"{self.kind} needs depth >= {lo}")
        if self.kind == "comb":
            budget = self.params.get("index_budget", comb.DEFAULT_INDEX_BUDGET)
            if not isinstance(budget, int) or budget < 1:
                raise SpecError("index budget must be a positive integer")
            if self.params.get("p_rule", "default") not in comb.EXPONENT_RULES:
                raise SpecError("unknown exponent rule")
        if self.kind == "comb-full-support" and decode_rat(self.params.get("b0", "1")) <= 0:
            raise SpecError("b0 must be positive")
        if self.kind == "fullsupport" and int(self.params.get("h0", 2)) < 2:
            raise SpecError("h0 must be at least 2")
        return self

    def header(self) -> dict:
        return {"kind": self.kind, "depth": self.depth, "params": self.params}


def spec_for(kind: str, depth: Optional[int] = None, budget: Optional[int] = None,
             b0: str = "1", h0: int = 2) -> FamilySpec:
    depth = DEFAULT_DEPTH.get(kind, 1) if depth is None else depth
    params: dict = {}
    if kind == "comb":
        params = {"p_rule": "default", "index_budget": budget or comb.DEFAULT_INDEX_BUDGET}
    elif kind == "comb-full-support":
        params = {"b0": b0}
    elif kind == "fullsupport":
        params = {"h0": h0}
    return FamilySpec(kind, depth, params).validate()


# -- encoding helpers ------------------------------------------------------------------


def _vec(v) -> list:
    return [encode_radical(x) for x in v]


def _unvec(items) -> PrefixVec:
    return PrefixVec.of([decode_radical(x) for x in items])


def _rats(v) -> list:
    return [encode_rat(x) for x in v]


def _unrats(items) -> list[Fraction]:
    return [decode_rat(x) for x in items]


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


# -- generation ------------------------------------------------------------------------------


def _sample_paths(depth: int, count: int, rng: random.Random) -> list[comb.CombPath]:
    out = []
    for _ in range(count):
        n = rng.randint(0, depth)
        out.append(comb.CombPath(tuple(rng.randint(0, 1) for _ in range(n)), rng.randint(0, 1)))
    return out


def _comb_payload(spec: FamilySpec) -> dict:
    params = comb.comb_params(spec.depth, spec.params.get("p_rule", "default"),
                              spec.params.get("index_budget", comb.DEFAULT_INDEX_BUDGET))
    table = [
        {"n": n, "p": encode_rat(params.p[n]), "r": str(params.r[n]), "k": str(params.k[n]),
         "eps_sq": encode_rat(params.eps_sq[n]), "start": str(params.starts[n])}
        for n in range(spec.depth + 1)
    ]
    level = max(n for n in range(spec.depth + 1) if params.starts[n + 1] <= PREFIX_CAP)
    length = params.starts[level + 1]
    paths = _sample_paths(spec.depth, 4, random.Random(f"comb:{spec.depth}:{SAMPLE_SEED}"))
    elements = [
        {"bits": "".join(map(str, x.bits)), "tail": x.tail,
         "prefix": _vec(comb.comb_entry(params, x, m) for m in range(length))}
        for x in paths
    ]
    return {"table": table, "total": str(params.total), "prefix_level": level, "elements": elements}


def _comb_fs_payload(spec: FamilySpec) -> dict:
    fam = comb.comb_full_support(spec.depth, decode_rat(spec.params.get("b0", "1")))
    return {"b_sq": _rats(fam.b_sq), "total": str(fam.total)}


def _kunen_payload(spec: FamilySpec) -> dict:
    tree = kunen.kunen_tree(spec.depth)
    return {
        "levels": [[_vec(v) for v in tree.level(n)] for n in range(1, spec.depth + 1)],
        "ids": [tree.level_ids(n) for n in range(1, spec.depth + 1)],
        "splits": [[n, *tree.split_at[n]] for n in range(2, spec.depth + 1)],
    }


def _fullsupport_payload(spec: FamilySpec) -> dict:
    build = fullsupport.build_perfect_family(int(spec.params.get("h0", 2)), stages=spec.depth)
    c = build.condition
    return {
        "h": c.h,
        "seed": [_rats(r) for r in build.seed],
        "segments": [
            {"block": [_rats(col) for col in seg.block], "times": str(seg.times),
             "stage": seg.stage, "kind": seg.kind}
            for seg in c.segments
        ],
        "requirements": [
            {"i": r.i, "j": r.j, "k": str(r.k), "eps": encode_rat(r.eps), "base": encode_rat(r.base)}
            for r in c.requirements
        ],
        "stages": [
            {"stage": rec.stage, "h": rec.h, "eps": encode_rat(rec.eps),
             "columns_before": str(rec.columns_before),
             "columns_after_pairs": str(rec.columns_after_pairs),
             "columns_after": str(rec.columns_after),
             "pad": {"start": str(rec.pad.start), "stop": str(rec.pad.stop),
                     "eps": encode_rat(rec.pad.eps), "delta": encode_rat(rec.pad.delta),
                     "repeats": str(rec.pad.repeats), "kind": rec.pad.kind,
                     "block_width": rec.pad.block_width}}
            for rec in build.stages
        ],
    }


def _l2tree_payload(spec: FamilySpec) -> dict:
    tree = l2fam.unequal_tree(spec.depth)
    n_split = range(1, spec.depth)
    return {
        "levels": [[_vec(v) for v in tree.level(n)] for n in range(1, spec.depth + 1)],
        "ids": [tree.ids[n - 1] for n in range(1, spec.depth + 1)],
        "splits": [[n, *tree.split_at[n]] for n in range(2, spec.depth + 1)],
        "delta": {str(n): encode_rat(tree.delta[n]) for n in n_split},
        "b": {str(n): encode_rat(tree.b[n]) for n in n_split},
        "m_sq": {str(n): encode_rat(tree.m_sq[n]) for n in n_split if n in tree.m_sq},
    }


def _staircase_payload(spec: FamilySpec) -> dict:
    return {"vectors": [_rats(l2fam.staircase(n).rationals()) for n in range(spec.depth - 1)]}


def _grid_payload(spec: FamilySpec) -> dict:
    vecs = []
    for n in range(spec.depth):
        for m in range(spec.depth):
            h = l2fam.grid_vector(n, m)
            idx = sorted(h.support.indices)
            vecs.append({"row": n, "m": m, "entries": [[str(z), encode_rat(h.rational(z))] for z in idx]})
    return {"pairing": "cantor", "vectors": vecs}


PAYLOADS = {
    "comb": _comb_payload,
    "comb-full-support": _comb_fs_payload,
    "kunen": _kunen_payload,
    "fullsupport": _fullsupport_payload,
    "l2tree": _l2tree_payload,
    "staircase": _staircase_payload,
    "grid": _grid_payload,
}


def generate(spec: FamilySpec) -> dict:
    spec.validate()
    return {"format": FORMAT, "version": VERSION, "spec": spec.header(), "payload": PAYLOADS[spec.kind](spec)}


def read_spec(doc: Any) -> FamilySpec:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise SpecError("not a family file")
    head = doc.get("spec")
    if not isinstance(head, dict) or "payload" not in doc:
        raise SpecError("family file lacks a spec header or payload")
    return FamilySpec(head.get("kind"), head.get("depth"), head.get("params") or {}).validate()


# -- verification ------------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""
    residual: Optional[str] = None

    def line(self) -> str:
        tail = f" residual={self.residual}" if self.residual is not None else ""
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}{': ' + self.detail if self.detail else ''}{tail}"


@dataclass
class VerifyReport:
    kind: str
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


def _is_scalar(obj) -> bool:
    return isinstance(obj, dict) and "num" in obj and "den" in obj


def first_difference(expected, actual, path: str = "payload") -> Optional[tuple[str, str]]:
    """First place the payloads differ, with an exact residual when both are scalars."""
    if _is_scalar(expected) and _is_scalar(actual):
        try:
            a, e = decode_radical(actual), decode_radical(expected)
        except (ValueError, KeyError, ZeroDivisionError) as exc:
            return path, f"undecodable scalar ({exc})"
        diff = RadicalSum.of(a) - RadicalSum.of(e)
        return None if diff.is_zero() else (path, str(diff))
    if isinstance(expected, dict) and isinstance(actual, dict):
        if sorted(expected) != sorted(actual):
            return path, "keys differ"
        for key in sorted(expected):
            found = first_difference(expected[key], actual[key], f"{path}.{key}")
            if found:
                return found
        return None
    if isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            return path, f"length {len(actual)} != {len(expected)}"
        for i, (e, a) in enumerate(zip(expected, actual)):
            found = first_difference(e, a, f"{path}[{i}]")
            if found:
                return found
        return None
    if expected != actual:
        try:
            return path, str(Fraction(str(actual)) - Fraction(str(expected)))
        except (ValueError, ZeroDivisionError):
            return path, f"{actual!r} != {expected!r}"
    return None


def _pairs(n: int, pairs, rng: random.Random) -> list[tuple[int, int]]:
    allp = list(combinations(range(n), 2))
    if pairs == "all" or pairs is None or pairs >= len(allp):
        return allp
    return sorted(rng.sample(allp, pairs))


def _check_levels(levels: list[list[PrefixVec]], pairs, rng, name: str) -> list[Check]:
    checks = []
    for n, vecs in enumerate(levels, start=1):
        shape = len(vecs) == n and all(len(v) == n for v in vecs)
        checks.append(Check(f"{name} level {n} shape", shape, f"{len(vecs)} vectors"))
        if not shape:
            continue
        chosen = _pairs(n, pairs, rng)
        bad = None
        for i, j in chosen:
            v = vecs[i].dot(vecs[j])
            if not v.is_zero():
                bad = (i, j, v)
                break
        if bad:
            checks.append(Check(f"{name} level {n} orthogonality", False, f"pair ({bad[0]}, {bad[1]})", str(bad[2])))
        else:
            checks.append(Check(f"{name} level {n} orthogonality", True, f"{len(chosen)} pairs exact 0"))
        r = rank_radical([list(v) for v in vecs])
        checks.append(Check(f"{name} level {n} rank", r == n, f"rank {r}"))
        if n > 1:
            prev = levels[n - 2]
            kept = sum(1 for v in vecs if PrefixVec(v.entries[:-1]) in prev)
            checks.append(Check(f"{name} level {n} extends level {n - 1}", kept == n, f"{kept} prefixes found"))
    return checks


def _verify_kunen(spec, payload, pairs, rng) -> list[Check]:
    levels = [[_unvec(v) for v in lvl] for lvl in payload["levels"]]
    checks = _check_levels(levels, pairs, rng, "kunen")
    ids = payload["ids"]
    for n, parent, plus, minus in payload["splits"]:
        # children carry +-w with w**2 = (s, s)
        s = levels[n - 2][ids[n - 2].index(parent)]
        w = levels[n - 1][ids[n - 1].index(plus)][n - 1]
        diff = w.square() - s.norm_sq()
        checks.append(Check(f"kunen split weight at level {n}", diff == 0, "", None if diff == 0 else str(diff)))
    return checks


def _verify_l2tree(spec, payload, pairs, rng) -> list[Check]:
    levels = [[_unvec(v) for v in lvl] for lvl in payload["levels"]]
    checks = _check_levels(levels, pairs, rng, "l2tree")
    ids = payload["ids"]
    for n, parent, plus, minus in payload["splits"]:
        lvl = n - 1
        d, b = decode_rat(payload["delta"][str(lvl)]), decode_rat(payload["b"][str(lvl)])
        s = levels[lvl - 1][ids[lvl - 1].index(parent)]
        prod = d * b - s.norm_sq()
        checks.append(Check(f"l2tree split {lvl} delta*b = (s,s)", prod == 0, "", None if prod == 0 else str(prod)))
        bound = d <= Fraction(1, 2 ** (lvl - 1))
        checks.append(Check(f"l2tree split {lvl} delta <= 2^-(n-1)", bound, str(d)))
        if str(lvl) in payload["m_sq"]:
            m = l2fam.minmax_radius(levels[lvl - 1]) - decode_rat(payload["m_sq"][str(lvl)])
            checks.append(Check(f"l2tree level {lvl} min-max radius", m == 0, "", None if m == 0 else str(m)))
    return checks


def _verify_comb(spec, payload, pairs, rng) -> list[Check]:
    table = payload["table"]
    ps = tuple(decode_rat(t["p"]) for t in table)
    rs = tuple(int(t["r"]) for t in table)
    ks = tuple(int(t["k"]) for t in table)
    eps_sq = tuple(decode_rat(t["eps_sq"]) for t in table)
    starts = tuple(int(t["start"]) for t in table) + (int(payload["total"]),)
    params = comb.CombParams(spec.depth, ps, rs, ks, eps_sq, starts)
    checks = []
    tele = all(2 * sum(rs[: n + 1]) == 2 * rs[n + 1] for n in range(len(rs) - 1))
    checks.append(Check("comb telescoping sum 2r_n", tele))
    ratio = [n for n in range(len(rs)) if eps_sq[n] * ks[n] != rs[n]]
    checks.append(Check("comb eps^2 = r/k", not ratio, f"bad levels {ratio}" if ratio else ""))
    layout = all(starts[n + 1] - starts[n] == 2**n * ks[n] for n in range(len(ks)))
    checks.append(Check("comb block layout", layout))
    count = 20 if pairs in (None, "all") else pairs
    bad = None
    for _ in range(count):
        while True:
            x, y = _sample_paths(spec.depth - 1, 2, rng)
            split = comb.divergence_level(x, y)
            if split is not None and split + 1 <= spec.depth:
                break
        cert = comb.comb_inner(params, x, y)
        if not cert.value.is_zero():
            bad = (x.label(), y.label(), cert.value)
            break
    if bad:
        checks.append(Check("comb sampled pairs", False, f"pair ({bad[0]}, {bad[1]})", str(bad[2])))
    else:
        checks.append(Check("comb sampled pairs", True, f"{count} pairs exact 0"))
    level = payload["prefix_level"]
    elems = [(comb.CombPath(tuple(int(c) for c in e["bits"]), e["tail"]), _unvec(e["prefix"]))
             for e in payload["elements"]]
    for a, b in combinations(range(len(elems)), 2):
        (x, px), (y, py) = elems[a], elems[b]
        if len(px) != len(py) or len(px) != starts[level + 1]:
            checks.append(Check("comb prefix length", False, f"elements {a}, {b}"))
            continue
        diff = px.dot(py) - comb.comb_partial(params, x, y, level)
        checks.append(Check(f"comb prefix pair ({a}, {b}) matches level sums", diff.is_zero(),
                            "", None if diff.is_zero() else str(diff)))
    return checks


def _verify_comb_fs(spec, payload, pairs, rng) -> list[Check]:
    b_sq = tuple(_unrats(payload["b_sq"]))
    fam = comb.FullSupportComb(spec.depth, decode_rat(spec.params.get("b0", "1")), b_sq)
    checks = []
    bad = [(n, fam.residual(n)) for n in range(spec.depth) if fam.residual(n) != 0]
    checks.append(Check("balancing identity", not bad, f"levels {[n for n, _ in bad]}" if bad else
                        f"{spec.depth} levels exact 0", str(bad[0][1]) if bad else None))
    count = 10 if pairs in (None, "all") else pairs
    for _ in range(count):
        while True:
            x, y = _sample_paths(spec.depth - 2, 2, rng)
            if comb.divergence_level(x, y) is not None:
                break
        try:
            cert = fam.certificate(x, y, spec.depth)
            part = abs(cert.sums[-1][1].rational())
            ok = part <= cert.tail_bound
            checks.append(Check(f"pair ({x.label()}, {y.label()}) partial within tail", ok,
                                f"|partial| = {part}, bound {cert.tail_bound}"))
        except ArithmeticError as exc:
            checks.append(Check(f"pair ({x.label()}, {y.label()})", False, str(exc)))
    return checks


def _verify_fullsupport(spec, payload, pairs, rng) -> list[Check]:
    h = payload["h"]
    segs = tuple(
        fullsupport.Segment(tuple(tuple(_unrats(col)) for col in s["block"]), int(s["times"]),
                            s["stage"], s["kind"])
        for s in payload["segments"]
    )
    reqs = tuple(
        fullsupport.Requirement(r["i"], r["j"], int(r["k"]), decode_rat(r["eps"]), decode_rat(r["base"]))
        for r in payload["requirements"]
    )
    checks = []
    widths = all(len(col) == h for s in segs for col in s.block)
    checks.append(Check("fullsupport column heights", widths))
    if not widths:
        return checks
    c = fullsupport.SignCondition(h, segs, reqs)
    viol = fullsupport.verify_condition(c)
    if viol:
        v = viol[0]
        where = f" {v.requirement.key()}" if v.requirement is not None else ""
        checks.append(Check("fullsupport requirements and nonzero entries", False, f"{v.what}{where}",
                            None if v.value is None else str(v.value)))
    else:
        checks.append(Check("fullsupport requirements and nonzero entries", True,
                            f"{len(reqs)} requirements, {c.N} columns"))
    # the last step doubles every row; copies of one parity inherit the parents'
    # requirements, mixed-parity pairs wait for the next stage's require_pair
    covered = {(r.i, r.j) for r in reqs}
    chosen = [(i, j) for i, j in _pairs(h, pairs, rng) if i % 2 == j % 2]
    missing = [p for p in chosen if p not in covered]
    checks.append(Check("fullsupport same-parity pairs carry requirements", not missing,
                        f"{len(chosen)} pairs" if not missing else f"missing {missing[:3]}"))
    return checks


def _verify_staircase(spec, payload, pairs, rng) -> list[Check]:
    vecs = [_unrats(v) for v in payload["vectors"]]
    d = spec.depth
    checks = []
    bad = None
    for i, j in _pairs(len(vecs), pairs, rng):
        v = sum((a * b for a, b in zip(vecs[i], vecs[j])), Fraction(0))
        if v:
            bad = (i, j, v)
            break
    checks.append(Check("staircase orthogonality", bad is None,
                        f"pair ({bad[0]}, {bad[1]})" if bad else "", str(bad[2]) if bad else None))
    rows = [v + [Fraction(0)] * (d - len(v)) for v in vecs]
    if any(len(r) != d for r in rows):
        checks.append(Check("staircase lengths", False))
        return checks
    basis = nullspace(rows, d)
    ones = len(basis) == 1 and all(x == basis[0][0] != 0 for x in basis[0])
    checks.append(Check("staircase complement is the ones direction", ones, f"dimension {len(basis)}"))
    return checks


def _verify_grid(spec, payload, pairs, rng) -> list[Check]:
    vecs = [(v["row"], v["m"], {int(z): decode_rat(q) for z, q in v["entries"]}) for v in payload["vectors"]]
    checks = []
    bad = None
    for i, j in _pairs(len(vecs), pairs, rng):
        a, b = vecs[i][2], vecs[j][2]
        v = sum((a[z] * b[z] for z in a.keys() & b.keys()), Fraction(0))
        if v:
            bad = (i, j, v)
            break
    checks.append(Check("grid orthogonality", bad is None,
                        f"pair ({bad[0]}, {bad[1]})" if bad else "", str(bad[2]) if bad else None))
    rows_bad = None
    for n, m, ent in vecs:
        for r in range(spec.depth + 1):
            total = sum((q for z, q in ent.items() if l2fam.GRID.unpair(z)[0] == r), Fraction(0))
            if total:
                rows_bad = (n, m, r, total)
                break
        if rows_bad:
            break
    checks.append(Check("grid completions are orthogonal", rows_bad is None,
                        f"vector ({rows_bad[0]}, {rows_bad[1]}) against row {rows_bad[2]}" if rows_bad else "",
                        str(rows_bad[3]) if rows_bad else None))
    return checks


VERIFIERS = {
    "comb": _verify_comb,
    "comb-full-support": _verify_comb_fs,
    "kunen": _verify_kunen,
    "fullsupport": _verify_fullsupport,
    "l2tree": _verify_l2tree,
    "staircase": _verify_staircase,
    "grid": _verify_grid,
}


def verify(doc: dict, pairs=None) -> VerifyReport:
    spec = read_spec(doc)
    rng = random.Random(f"verify:{spec.kind}:{spec.depth}:{SAMPLE_SEED}")
    payload = doc["payload"]
    try:
        checks = VERIFIERS[spec.kind](spec, payload, pairs, rng)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        checks = [Check("payload structure", False, f"{type(exc).__name__}: {exc}")]
    fresh = PAYLOADS[spec.kind](spec)
    diff = first_difference(fresh, payload)
    if diff is None:
        checks.append(Check("payload matches regeneration", True))
    else:
        checks.append(Check("payload matches regeneration", False, diff[0], diff[1]))
    return VerifyReport(spec.kind, checks)
