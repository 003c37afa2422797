import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from generators import gen_program, rand_combinable, rand_prob, rand_type, rand_wellformed
from probsess.analysis import success_prob, success_prob_matrix
from probsess.checker import check_program
from probsess.numeric import Infeasible, LinearSystem, SingularMatrix, feasible, identity, invert, matmul
from probsess.parser import parse_program
from probsess.printer import render
from probsess.syntax import Branch, Choice, Done, New, Recv, Send, free_names, substitute
from probsess.typeops import combine, dual, type_equal

seeds = st.integers(min_value=0, max_value=2**32 - 1)
small = st.fractions(min_value=-5, max_value=5, max_denominator=7)
unit = st.fractions(min_value=0, max_value=1, max_denominator=9)


@given(st.integers(min_value=1, max_value=4).flatmap(
    lambda n: st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n)))
def test_inverse_is_two_sided(m):
    try:
        inv = invert(m)
    except SingularMatrix:
        return
    n = len(m)
    assert matmul(m, inv) == identity(n)
    assert matmul(inv, m) == identity(n)


@given(st.lists(st.tuples(small, small, small), min_size=1, max_size=4))
def test_feasible_answers_satisfy(rows):
    sys = LinearSystem.from_sparse(
        ["a", "b"], [({"a": a, "b": b}, c) for a, b, c in rows],
        {"a": (Fraction(0), Fraction(1)), "b": (Fraction(0), Fraction(1))},
    )
    try:
        sol = feasible(sys)
    except Infeasible:
        return
    assert sys.satisfied_by(sol)


@given(unit, unit)
def test_feasible_finds_planted_solution(a, b):
    rows = [({"a": 1, "b": 2}, a + 2 * b), ({"a": 3, "b": -1}, 3 * a - b)]
    sys = LinearSystem.from_sparse(["a", "b"], rows, {"a": (Fraction(0), Fraction(1)), "b": (Fraction(0), Fraction(1))})
    assert feasible(sys) == {"a": a, "b": b}


@settings(max_examples=60)
@given(seeds)
def test_dual_is_involutive_and_preserves_probability(seed):
    table, t = rand_wellformed(random.Random(seed))
    assert type_equal(dual(dual(t)), t, table)
    assert success_prob(dual(t), table) == success_prob(t, table)


@settings(max_examples=60)
@given(seeds)
def test_two_methods_agree(seed):
    table, t = rand_wellformed(random.Random(seed))
    assert success_prob(t, table) == success_prob_matrix(t, table)


@settings(max_examples=60)
@given(seeds)
def test_combination_is_weighted_average(seed):
    table, p, t1, t2 = rand_combinable(random.Random(seed))
    c = combine(p, t1, t2, table)
    assert c is not None
    assert success_prob(c, table) == p * success_prob(t1, table) + (1 - p) * success_prob(t2, table)


@settings(max_examples=60)
@given(seeds, unit)
def test_combination_is_idempotent(seed, p):
    table, t = rand_wellformed(random.Random(seed))
    assert type_equal(combine(p, t, t, table), t, table)


def _strip(t):
    match t:
        case Choice(_, l, _) | Branch(_, l, _):
            return _strip(l)
    if hasattr(t, "cont"):
        return type(t)(t.payload, _strip(t.cont))
    return t


@settings(max_examples=60)
@given(seeds)
def test_choice_free_types_are_certain(seed):
    rng = random.Random(seed)
    t = _strip(rand_type(rng, 5))
    assert success_prob(t, {}) in (0, 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_render_parse_round_trip(seed):
    prog = gen_program(random.Random(seed))
    again = parse_program(render(prog))
    assert again == prog
    assert check_program(again).main_context == check_program(prog).main_context


@given(st.sampled_from(["a", "b", "c"]), st.sampled_from(["u", "v", "w"]))
def test_free_names_ignore_binder_choice(x, fresh):
    p = Recv(x, "y", Send("y", "z", Done(x)))
    q = Recv(x, fresh, Send(fresh, "z", Done(x)))
    assert free_names(p) == free_names(q) == {x, "z"}
    r = New("k", Send("k", x, Done("k")))
    assert free_names(r) == free_names(New(fresh, substitute(Send("k", x, Done("k")), {"k": fresh}))) == {x}


@given(seeds)
def test_probabilities_render_and_parse(seed):
    p = rand_prob(random.Random(seed))
    prog = parse_program(f"main = done x +[{p.numerator}/{p.denominator}] idle")
    assert prog.main.p == p
