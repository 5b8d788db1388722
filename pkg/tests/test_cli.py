import json
import random

import pytest

from filetools import entry_paths, perturbed, residuals
from orthofam import familyio
from orthofam.cli import main, parse_script, UsageError
from orthofam.familyio import KINDS, dumps, first_difference, generate, spec_for, verify

SMALL = {"comb": 2, "comb-full-support": 6, "kunen": 5, "fullsupport": 2, "l2tree": 6, "staircase": 5, "grid": 4}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("kind", KINDS)
def test_generate_verify_round_trip(kind, tmp_path, capsys):
    path = tmp_path / f"{kind}.json"
    flags = ["--stages", str(SMALL[kind])] if kind == "fullsupport" else ["--depth", str(SMALL[kind])]
    code, out, _ = run(capsys, "generate", "--family", kind, *flags, "--out", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["format"] == familyio.FORMAT and doc["spec"]["kind"] == kind
    code, out, _ = run(capsys, "verify", "--in", str(path))
    assert code == 0, out
    assert out.strip().endswith("PASS")
    assert "FAIL" not in out


def test_generation_is_deterministic():
    spec = spec_for("fullsupport", 2)
    assert dumps(generate(spec)) == dumps(generate(spec))


@pytest.mark.parametrize("kind,depth", [("kunen", 5), ("fullsupport", 2)])
def test_tampered_entry_fails(kind, depth, tmp_path, capsys):
    doc = generate(spec_for(kind, depth))
    paths = entry_paths(doc)
    rng = random.Random(7)
    for path in rng.sample(paths, 5):
        bad = perturbed(doc, path)
        target = tmp_path / "bad.json"
        target.write_text(dumps(bad))
        code, out, _ = run(capsys, "verify", "--in", str(target))
        assert code == 1
        found = residuals(out)
        assert found and all(r not in ("0", "0/1") for r in found)
        diff = first_difference(doc["payload"], bad["payload"])
        assert diff is not None


def test_verify_pairs_sampling(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(dumps(generate(spec_for("comb", 2))))
    assert run(capsys, "verify", "--in", str(path), "--pairs", "3")[0] == 0
    assert run(capsys, "verify", "--in", str(path), "--pairs", "zero")[0] == 2


def test_verify_report_object():
    doc = generate(spec_for("l2tree", 5))
    rep = verify(doc, None)
    assert rep.ok and rep.kind == "l2tree"


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "generate")[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "verify")[0] == 2
    assert run(capsys, "verify", "--in", str(tmp_path / "missing.json"))[0] == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert run(capsys, "verify", "--in", str(tmp_path / "junk.json"))[0] == 2
    assert run(capsys, "generate", "--family", "kunen", "--depth", "0")[0] == 2
    assert run(capsys, "report", "lp", "--family", "kunen")[0] == 2
    assert run(capsys, "report", "lp", "--p", "2")[0] == 2


def test_comb_budget_failure(capsys):
    code, _, err = run(capsys, "generate", "--family", "comb", "--depth", "4", "--budget", "1000")
    assert code == 1 and "budget" in err


def test_witness_commands(tmp_path, capsys):
    vec = tmp_path / "x.json"
    vec.write_text("[1, -1]")
    code, out, _ = run(capsys, "witness", "--family", "kunen", "--in", str(vec))
    assert code == 0 and json.loads(out)["value_text"] == "2"
    vec.write_text("3/5 4/5")
    code, out, _ = run(capsys, "witness", "--family", "l2tree", "--in", str(vec))
    assert code == 0 and json.loads(out)["value_text"] == "7/5"
    vec.write_text("0 0")
    assert run(capsys, "witness", "--family", "kunen", "--in", str(vec))[0] == 2
    assert run(capsys, "witness", "--family", "comb", "--in", str(vec))[0] == 2


def test_reports(capsys):
    code, out, _ = run(capsys, "report", "lp", "--p", "5/2")
    doc = json.loads(out)
    assert code == 0 and doc["n0"] == 2 and doc["ok"]
    code, out, _ = run(capsys, "report", "height-series", "--p", "2", "--stages", "3")
    assert code == 0 and json.loads(out)["lower_bound"] == 2
    code, out, _ = run(capsys, "report", "complement", "--depth", "6")
    assert code == 0 and json.loads(out)["dimension"] == 1


SCRIPT = """# two disjoint indicators
SEQ e even
SEQ o odd
REQ e 1/2
REQ o 1/2
NORM 10
"""


def test_diagonalize_script(tmp_path, capsys):
    script = tmp_path / "s.txt"
    script.write_text(SCRIPT)
    out_path = tmp_path / "row.json"
    code, out, _ = run(capsys, "diagonalize", "--script", str(script), "--out", str(out_path))
    assert code == 0 and json.loads(out)["ok"]
    full = json.loads(out_path.read_text())
    assert all(cp["ok"] for cp in full["checkpoints"])
    script.write_text("SEQ a residue 2 0\nSEQ b residue 3 0\nREQ a 1/2\nREQ b 1/2\n")
    assert run(capsys, "diagonalize", "--script", str(script))[0] == 1
    script.write_text("")
    assert run(capsys, "diagonalize", "--script", str(script))[0] == 0


@pytest.mark.parametrize("text", ["REQ x 1/2", "SEQ a bogus", "SEQ a even\nREQ a 0", "NORM", "FOO 1", "SEQ a even\nMOD a b disjoint 3"])
def test_script_errors(text):
    with pytest.raises(UsageError):
        parse_script(text)
