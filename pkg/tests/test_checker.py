from fractions import Fraction as F

import pytest

from helpers import load
from probsess.checker import ConstraintSystem, Lin, TypingError, check_closed, check_process, check_program
from probsess.numeric import Infeasible
from probsess.parser import parse_process, parse_program
from probsess.syntax import Completed


def test_lin_arithmetic():
    a = Lin.var("a") + Lin.of(2)
    b = (a - Lin.var("a").scale(F(1, 2))).scale(2)
    assert b.evaluate({"a": F(1, 3)}) == F(1, 3) + 4


def test_empty_system_is_feasible():
    assert ConstraintSystem().solve() == {}


def test_contradictory_system():
    acc = ConstraintSystem()
    v = acc.fresh()
    acc.equate(v, 1)
    acc.equate(v, 0)
    with pytest.raises(Infeasible):
        acc.solve()


def test_auction_accepted():
    report = check_program(load("auction"))
    assert report.accepted
    assert report.main_context == {"x": F(1, 3)}
    assert "x : #[1/3]" in report.text()


def test_work_sharing_accepted():
    report = check_program(load("work_sharing"))
    assert report.accepted, report.text()
    assert report.main_context == {"x": F(2, 3), "y": 0}


def test_typing_choices():
    report = check_program(load("typing_choices"))
    assert [v.ok for v in report.verdicts] == [True, True, True]
    bad = check_program(load("typing_choices_bad"))
    assert bad["Twice"].rule == "t-left"


def test_wrong_annotation_is_infeasible():
    prog = parse_program("""
        def Invert(x: &[1/3]{done; end}, y: +[1/2]{done; end}) =
          case x { y.right.done x ; y.left.done y }
    """)
    verdict = check_program(prog)["Invert"]
    assert not verdict.ok and verdict.rule == "constraints"


def test_sending_branch_endpoint_is_unsafe():
    prog = parse_program("""
        def P(x: !(&[1/2]{end; end}).end, y: &[1/2]{end; end}) = x!y.case y { idle ; idle }
    """)
    verdict = check_program(prog)["P"]
    assert not verdict.ok and verdict.rule == "t-out"


def test_linearity_of_done():
    prog = parse_program("def P(x: done) = done x")
    assert check_program(prog).accepted
    prog = parse_program("def P(x: done) = idle")
    assert not check_program(prog).accepted


def test_main_context_for_choice():
    prog = parse_program(
        "main = (x.left.done x +[1/4] x.right.idle) |[x: +[1/4]{done; end}]| case x { done x ; idle }"
    )
    assert check_program(prog).main_context == {"x": F(1, 4)}


def test_check_closed_fixed_context():
    prog = load("auction")
    assert check_closed(prog, prog.main, {"x": F(1, 3)}).ok
    assert not check_closed(prog, prog.main, {"x": F(1, 2)}).ok


def test_check_process_produces_constraints():
    proc = parse_process("(x.left.done x +[1/2] x.right.idle) |[x: +[1/2]{done; end}]| case x { done x ; idle }")
    prog = parse_program("")
    acc = check_process(prog, {"x": Completed(F(1, 2))}, proc)
    assert len(acc) > 0 and acc.solve() is not None
    with pytest.raises(TypingError, match="t-par"):
        check_process(prog, {"x": Completed(F(1, 3))}, proc)


def test_json_records():
    report = check_program(load("typing_choices_bad"))
    lines = report.json_lines().splitlines()
    assert '"verdict": "rejected"' in lines[0]
