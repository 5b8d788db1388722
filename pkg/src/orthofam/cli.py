"""``orthofam`` command line: generate, verify, witness, report, diagonalize.

Exit codes: 0 pass, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import comb, diagonal, familyio, fullsupport, kunen, l2fam
from .exact import encode_rat, encode_radical, encode_sum
from .sequences import Unverifiable

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj: dict, out: Optional[str]) -> None:
    text = familyio.dumps(obj)
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _rat(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational: {text!r}") from exc


def _pairs_arg(text: Optional[str]):
    if text is None or text == "all":
        return text
    try:
        k = int(text)
    except ValueError as exc:
        raise UsageError("--pairs takes 'all' or a positive count") from exc
    if k < 1:
        raise UsageError("--pairs takes 'all' or a positive count")
    return k


# -- generate / verify ----------------------------------------------------------------


def cmd_generate(args) -> int:
    if not args.family:
        raise UsageError("generate needs --family")
    depth = args.stages if args.family == "fullsupport" and args.stages else args.depth
    try:
        spec = familyio.spec_for(args.family, depth, args.budget)
    except familyio.SpecError as exc:
        raise UsageError(str(exc)) from exc
    try:
        doc = familyio.generate(spec)
    except comb.BlockBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = familyio.dumps(doc)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {spec.kind} depth {spec.depth} to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_PASS


def cmd_verify(args) -> int:
    if not args.inp:
        raise UsageError("verify needs --in")
    try:
        doc = json.loads(Path(args.inp).read_text())
        familyio.read_spec(doc)
    except (OSError, json.JSONDecodeError, familyio.SpecError) as exc:
        raise UsageError(f"cannot read family file: {exc}") from exc
    report = familyio.verify(doc, _pairs_arg(args.pairs))
    for check in report.checks:
        print(check.line())
    print(f"verify {report.kind}: {'PASS' if report.ok else 'FAIL'}")
    return EXIT_PASS if report.ok else EXIT_FAIL


# -- witness ----------------------------------------------------------------------------------


def _read_vector(path: str) -> list[Fraction]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read vector: {exc}") from exc
    try:
        items = json.loads(text)
        if not isinstance(items, list):
            raise UsageError("vector file must hold a list")
    except json.JSONDecodeError:
        items = text.split()
    try:
        return [Fraction(str(v)) for v in items]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"vector entries must be rationals: {exc}") from exc


def cmd_witness(args) -> int:
    if args.family not in ("kunen", "l2tree"):
        raise UsageError("witness needs --family kunen or --family l2tree")
    if not args.inp:
        raise UsageError("witness needs --in with a vector file")
    x = _read_vector(args.inp)
    if not any(x):
        raise UsageError("the zero vector has no witness")
    end = max(i for i, v in enumerate(x) if v) + 1
    if args.depth is not None and args.depth < end + 1:
        raise UsageError(f"depth {args.depth} too small: the vector needs depth {end + 1}")
    if args.family == "kunen":
        tree = kunen.kunen_tree(max(args.depth or 0, end + 1))
        w = kunen.maximality_witness(tree, x)
        out = {
            "family": "kunen",
            "start_level": w.start_level,
            "start_node": [encode_radical(v) for v in w.start_node],
            "start_value": encode_sum(w.start_value),
            "prefix": [encode_radical(v) for v in w.prefix],
            "value": encode_sum(w.value),
            "value_text": str(w.value),
            "dominates": w.dominates,
        }
        ok = not w.value.is_zero() and w.dominates
    else:
        tree = l2fam.unequal_tree(max(args.depth or 0, end + 1))
        w = l2fam.l2_witness(tree, x)
        out = {
            "family": "l2tree",
            "level": w.n,
            "scale": encode_rat(w.scale),
            "node": [encode_radical(v) for v in w.node],
            "head": encode_rat(w.head),
            "value": encode_rat(w.value),
            "value_text": str(w.value),
            "m_sq": encode_rat(w.m_sq),
            "delta": encode_rat(w.delta),
            "dominates": w.dominates,
            "tail_room": w.tail_room,
        }
        ok = w.value != 0 and w.dominates
    _emit(out, args.out)
    return EXIT_PASS if ok else EXIT_FAIL


# -- report ------------------------------------------------------------------------------------

REPORT_FAMILY = {"lp": "comb", "height-series": "fullsupport", "complement": "staircase"}


def cmd_report(args) -> int:
    kind = args.kind
    want = REPORT_FAMILY[kind]
    if args.family and args.family != want:
        raise UsageError(f"report {kind} applies to --family {want}, not {args.family}")
    if kind == "lp":
        p = _rat(args.p or "5/2")
        if p <= 2:
            raise UsageError("lp report needs p > 2")
        depth = args.depth if args.depth is not None else 6
        params = comb.comb_params(depth)
        rep = comb.comb_lp_report(params, comb.CombPath(()), p)
        out = {
            "report": "lp",
            "p": encode_rat(p),
            "n0": rep.n0,
            "head_lo": encode_rat(rep.partial.lo),
            "head_hi": encode_rat(rep.partial.hi),
            "tail_bound": encode_rat(rep.tail_bound),
            "level_checks": [{"n": n, "eps_below_one": a, "eps_pow_k_below_inv_n_sq": b}
                             for n, a, b in rep.level_checks],
            "ok": rep.ok,
        }
        ok = rep.ok
    elif kind == "height-series":
        p = int(_rat(args.p or "2"))
        stages = args.stages or 5
        build = fullsupport.build_perfect_family(2, stages=stages)
        total, qualifying, ok = fullsupport.height_series(build, p)
        out = {"report": "height-series", "p": p, "stages": stages, "sum": encode_rat(total),
               "sum_decimal_approx": f"{float(total):.6g}", "lower_bound": qualifying, "ok": ok}
    else:
        depth = args.depth if args.depth is not None else 7
        if depth < 2:
            raise UsageError("complement needs depth >= 2")
        rep = l2fam.complement_basis(depth)
        ok = rep.dimension == 1 and rep.ones_direction and rep.triangular_ok
        out = {"report": "complement", "depth": depth, "dimension": rep.dimension,
               "basis": [[encode_rat(v) for v in b] for b in rep.basis],
               "ones_direction": rep.ones_direction, "triangular": rep.triangular_ok, "ok": ok}
    _emit(out, args.out)
    return EXIT_PASS if ok else EXIT_FAIL


# -- diagonalize -----------------------------------------------------------------------------

GENERATORS = {
    "ones": lambda ident, args: diagonal.all_ones(ident),
    "even": lambda ident, args: diagonal.even_indicator(ident),
    "odd": lambda ident, args: diagonal.odd_indicator(ident),
    "residue": lambda ident, args: diagonal.residue_indicator(ident, int(args[0]), int(args[1])),
    "harmonic": lambda ident, args: diagonal.harmonic_signs(ident),
    "finite": lambda ident, args: diagonal.finite_seq(ident, [Fraction(a) for a in args]),
}


def parse_script(text: str) -> tuple[diagonal.Registry, list]:
    """Lines ``SEQ id gen [args]``, ``MOD a b disjoint N | alternating``,
    ``REQ id eps`` and ``NORM l``; ``#`` starts a comment."""
    reg, goals = diagonal.Registry(), []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        op, rest = words[0].upper(), words[1:]
        where = f"line {lineno}"
        try:
            if op == "SEQ":
                ident, gen, gargs = rest[0], rest[1], rest[2:]
                if gen not in GENERATORS:
                    raise UsageError(f"{where}: unknown generator {gen!r}")
                reg.register(GENERATORS[gen](ident, gargs))
            elif op == "MOD":
                a, b, how = rest[0], rest[1], rest[2]
                for ident in (a, b):
                    if ident not in reg:
                        raise UsageError(f"{where}: unregistered sequence {ident!r}")
                if how == "disjoint":
                    n = int(rest[3]) if len(rest) > 3 else 0
                    reg.set_modulus(a, b, lambda eps, n=n: n)
                elif how == "alternating":
                    reg.set_modulus(a, b, diagonal._alternating_modulus)
                else:
                    raise UsageError(f"{where}: unknown modulus {how!r}")
            elif op == "REQ":
                ident, eps = rest[0], Fraction(rest[1])
                if ident not in reg:
                    raise UsageError(f"{where}: unregistered sequence {ident!r}")
                if eps <= 0 or len(rest) != 2:
                    raise UsageError(f"{where}: REQ takes an id and a positive epsilon")
                goals.append(diagonal.ReqGoal(ident, eps))
            elif op == "NORM":
                if len(rest) != 1:
                    raise UsageError(f"{where}: NORM takes one bound")
                goals.append(diagonal.NormGoal(Fraction(rest[0])))
            else:
                raise UsageError(f"{where}: unknown directive {words[0]!r}")
        except (IndexError, ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"{where}: {exc or 'missing argument'}") from exc
    return reg, goals


def run_script(text: str) -> tuple[dict, bool]:
    reg, goals = parse_script(text)
    rep = diagonal.diagonalize(reg, goals)
    support = rep.condition.support()
    out = {
        "length": rep.condition.N,
        "row": [[n, encode_rat(rep.row[n])] for n in support],
        "square_sum": encode_rat(rep.final.square_sum),
        "square_sum_decimal_approx": f"{float(rep.final.square_sum):.6g}",
        "steps": [{"goal": _goal_text(st.goal), "method": st.method, "length": st.length} for st in rep.steps],
        "checkpoints": [
            {"x": cp.requirement.x, "k": cp.requirement.k, "eps": encode_rat(cp.requirement.eps),
             "head": encode_rat(cp.head), "low": encode_rat(cp.low), "high": encode_rat(cp.high),
             "ok": cp.ok}
            for cp in rep.final.checkpoints
        ],
        "side_totals": {z: encode_rat(v) for z, v in rep.final.side.items()},
        "goals_met": rep.goals_met,
        "ok": rep.ok,
    }
    return out, rep.ok


def _goal_text(g) -> str:
    return f"REQ {g.x} {g.eps}" if isinstance(g, diagonal.ReqGoal) else f"NORM {g.l}"


def cmd_diagonalize(args) -> int:
    if not args.script:
        raise UsageError("diagonalize needs --script")
    try:
        text = Path(args.script).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read script: {exc}") from exc
    try:
        out, ok = run_script(text)
    except (Unverifiable, diagonal.NoDonor, diagonal.InvariantViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        Path(args.out).write_text(familyio.dumps(out))
    summary = {k: out[k] for k in ("length", "square_sum", "goals_met", "ok", "steps")}
    sys.stdout.write(familyio.dumps(summary))
    return EXIT_PASS if ok else EXIT_FAIL


# -- entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthofam", description="Exact orthogonal families of sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *flags):
        if "family" in flags:
            p.add_argument("--family", choices=familyio.KINDS)
        if "depth" in flags:
            p.add_argument("--depth", type=int)
        if "out" in flags:
            p.add_argument("--out")
        if "in" in flags:
            p.add_argument("--in", dest="inp")
        if "pairs" in flags:
            p.add_argument("--pairs")
        if "p" in flags:
            p.add_argument("--p")
        if "stages" in flags:
            p.add_argument("--stages", type=int)
        if "budget" in flags:
            p.add_argument("--budget", type=int)

    g = sub.add_parser("generate", help="write a family file")
    common(g, "family", "depth", "out", "stages", "budget")
    g.set_defaults(func=cmd_generate)
    v = sub.add_parser("verify", help="check a family file")
    common(v, "in", "pairs", "depth")
    v.set_defaults(func=cmd_verify)
    w = sub.add_parser("witness", help="find a member with nonzero inner product")
    common(w, "family", "in", "depth", "out")
    w.set_defaults(func=cmd_witness)
    r = sub.add_parser("report", help="lp, height-series or complement report")
    r.add_argument("kind", choices=sorted(REPORT_FAMILY))
    common(r, "family", "depth", "p", "stages", "out")
    r.set_defaults(func=cmd_report)
    d = sub.add_parser("diagonalize", help="run a goal script")
    d.add_argument("--script")
    common(d, "out")
    d.set_defaults(func=cmd_diagonalize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
