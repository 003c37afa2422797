import json

import pytest

from helpers import PROGRAMS
from probsess.cli import decimal, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def path(name):
    return str(PROGRAMS / f"{name}.ps")


def test_decimal():
    from fractions import Fraction

    assert decimal(Fraction(1, 3)) == "0.33333333333333333333"
    assert decimal(Fraction(1, 4)) == "0.25"


def test_wf(capsys, tmp_path):
    code, out, _ = run(capsys, "wf", path("auction"))
    assert code == 0 and "T: well-formed" in out
    bad = tmp_path / "bad.ps"
    bad.write_text("type T = !int.T\n")
    code, out, _ = run(capsys, "wf", str(bad), "--json")
    assert code == 1
    rec = json.loads(out)
    assert rec["reason"] == "reachability" and rec["wellformed"] is False


def test_check(capsys):
    code, out, _ = run(capsys, "check", path("auction"))
    assert code == 0 and "x : #[1/3]" in out
    code, out, _ = run(capsys, "check", path("typing_choices_bad"), "--json")
    assert code == 1 and json.loads(out.splitlines()[0])["rule"] == "t-left"


def test_prob(capsys):
    code, out, _ = run(capsys, "prob", path("auction"), "--type", "T", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["equations"] == rec["matrix"] == "1/3" and rec["agree"]
    code, out, _ = run(capsys, "prob", path("work_sharing"))
    assert code == 0 and out.splitlines()[0].startswith("x: 2/3")
    code, out, _ = run(capsys, "prob", path("auction"), "--type", "~T")
    assert code == 0 and "1/3" in out


def test_run(capsys):
    code, out, _ = run(capsys, "run", path("auction"), "--session", "x", "--rounds", "4")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 6
    assert lines[4] == "4 3/4 1/4"
    assert lines[-1] == "type-level x : #[1/3]"


def test_mc(capsys):
    code, out, _ = run(capsys, "mc", path("auction"), "--session", "x", "--samples", "50", "--seed", "1", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["samples"] == 50 and rec["type_level"] == "1/3"
    assert run(capsys, "mc", path("auction"), "--session", "x", "--samples", "50", "--seed", "1", "--json")[1] == out


@pytest.mark.parametrize("argv", [
    ["wf", "/nonexistent.ps"],
    ["run", "AUCTION", "--session", "y"],
    ["frobnicate"],
    ["mc", "AUCTION", "--session", "x", "--samples", "-1"],
    ["prob", "AUCTION", "--type", "!!"],
])
def test_usage_errors(capsys, argv):
    argv = [path("auction") if a == "AUCTION" else a for a in argv]
    assert run(capsys, *argv)[0] == 2


def test_parse_error_exit(capsys, tmp_path):
    f = tmp_path / "p.ps"
    f.write_text("main = idle +[2] idle")
    code, _, err = run(capsys, "check", str(f))
    assert code == 2 and "1:15" in err
