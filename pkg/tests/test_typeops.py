from fractions import Fraction as F

import pytest

from probsess.parser import parse_type
from probsess.syntax import Base, Branch, Choice, Completed, EndFail, EndSucc, In, Out, Ref
from probsess.typeops import (
    TypeDefinitionError,
    TypeTable,
    combine,
    combine_context,
    dual,
    is_balanced,
    is_safe,
    is_unrestricted,
    type_equal,
    unfold,
)

AUCTION = TypeTable({"T": parse_type("!int.&[1/4]{done; ?int.+[2/3]{end; T}}", TypeTable({"T": EndFail()}))})


def test_unfold_reaches_constructor():
    assert isinstance(unfold(Ref("T"), AUCTION), Out)
    assert isinstance(unfold(Ref("~T"), AUCTION), In)
    assert unfold(EndSucc(), AUCTION) == EndSucc()


def test_table_rejects_bad_entries():
    with pytest.raises(TypeDefinitionError):
        TypeTable({"A": Ref("B")})
    with pytest.raises(TypeDefinitionError):
        TypeTable({"A": Ref("A")})
    with pytest.raises(TypeDefinitionError):
        TypeTable({"~A": EndFail()})


def test_equality_is_structural_up_to_unfolding():
    table = TypeTable({"A": Out(Base("int"), Ref("A")), "B": Out(Base("int"), Out(Base("int"), Ref("B")))})
    assert type_equal(Ref("A"), Ref("B"), table)
    assert not type_equal(Ref("A"), Out(Base("unit"), Ref("A")), table)
    assert not type_equal(Choice(F(1, 2), EndFail(), EndFail()), Choice(F(1, 3), EndFail(), EndFail()), table)
    assert type_equal(Completed(F(1, 2)), Completed(F(2, 4)), table)


def test_dual_swaps_polarity():
    t = Out(Base("int"), Branch(F(1, 4), EndSucc(), In(Ref("S"), Choice(F(2, 3), EndFail(), Ref("T")))))
    assert dual(t) == In(Base("int"), Choice(F(1, 4), EndSucc(), Out(Ref("S"), Branch(F(2, 3), EndFail(), Ref("~T")))))
    assert dual(dual(t)) == t
    with pytest.raises(TypeError):
        dual(Base("int"))


def test_dual_of_recursive_reference():
    assert type_equal(dual(Ref("T")), Ref("~T"), AUCTION)
    assert type_equal(unfold(Ref("~T"), AUCTION), dual(unfold(Ref("T"), AUCTION)), AUCTION)


def test_predicates():
    table = AUCTION
    assert is_unrestricted(EndFail(), table) and is_unrestricted(Base("int"), table)
    assert not is_unrestricted(EndSucc(), table)
    assert not is_unrestricted(Completed(F(1)), table)
    assert is_safe(Ref("T"), table)
    assert not is_safe(Branch(F(1, 2), EndFail(), EndFail()), table)
    assert is_balanced({"x": Completed(F(1, 3)), "n": Base("int"), "y": EndFail()}, table)
    assert not is_balanced({"x": Ref("T")}, table)


def test_combine_choices_and_completed():
    t1 = Choice(F(1, 3), EndSucc(), EndFail())
    t2 = Choice(F(2, 3), EndSucc(), EndFail())
    assert combine(F(1, 2), t1, t2, AUCTION) == Choice(F(1, 2), EndSucc(), EndFail())
    assert combine(F(1, 4), Completed(F(1)), Completed(F(0)), AUCTION) == Completed(F(1, 4))
    assert combine(F(1, 2), Ref("T"), Ref("T"), AUCTION) == Ref("T")


def test_combine_undefined():
    assert combine(F(1, 2), EndSucc(), EndFail(), AUCTION) is None
    t1 = Choice(F(1, 3), EndSucc(), EndFail())
    t2 = Choice(F(1, 3), EndFail(), EndSucc())
    assert combine(F(1, 2), t1, t2, AUCTION) is None
    branch = Branch(F(1, 3), EndSucc(), EndFail())
    assert combine(F(1, 2), branch, Branch(F(2, 3), EndSucc(), EndFail()), AUCTION) is None


def test_combine_context():
    c1 = {"x": Completed(F(1)), "n": Base("int")}
    c2 = {"x": Completed(F(0)), "n": Base("int")}
    assert combine_context(F(1, 3), c1, c2, AUCTION) == {"x": Completed(F(1, 3)), "n": Base("int")}
    assert combine_context(F(1, 3), c1, {"x": Completed(F(0))}, AUCTION) is None
