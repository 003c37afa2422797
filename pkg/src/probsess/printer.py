"""Concrete syntax output. ``parse_program(render(p))`` gives back ``p``."""

from __future__ import annotations

from fractions import Fraction

from probsess.syntax import (
    Base,
    Branch,
    Call,
    Case,
    Choice,
    Completed,
    Done,
    EndFail,
    EndSucc,
    Idle,
    In,
    IntLit,
    New,
    Out,
    Par,
    PChoice,
    Program,
    Recv,
    Ref,
    Select,
    Send,
    UnitLit,
)

_PAR, _CHOICE, _PREFIX = 0, 1, 2


def render_prob(p) -> str:
    if isinstance(p, Fraction):
        return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"
    return str(p)


def render_type(t) -> str:
    match t:
        case EndFail():
            return "end"
        case EndSucc():
            return "done"
        case Base(name):
            return name
        case Completed(p):
            return f"#[{render_prob(p)}]"
        case Ref(name):
            return name
        case In(payload, cont):
            return f"?{_payload(payload)}.{render_type(cont)}"
        case Out(payload, cont):
            return f"!{_payload(payload)}.{render_type(cont)}"
        case Branch(p, left, right):
            return f"&[{render_prob(p)}]{{{render_type(left)}; {render_type(right)}}}"
        case Choice(p, left, right):
            return f"+[{render_prob(p)}]{{{render_type(left)}; {render_type(right)}}}"
    raise TypeError(f"not a type: {t!r}")


def _payload(t) -> str:
    s = render_type(t)
    return f"({s})" if isinstance(t, (In, Out)) else s


def render_message(m) -> str:
    match m:
        case IntLit(v):
            return str(v)
        case UnitLit():
            return "()"
    return m


def render_process(p, level: int = _PAR) -> str:
    match p:
        case Idle():
            return "idle"
        case Done(x):
            return f"done {x}"
        case Recv(x, y, cont):
            return f"{x}?({y}).{render_process(cont, _PREFIX)}"
        case Send(x, m, cont):
            return f"{x}!{render_message(m)}.{render_process(cont, _PREFIX)}"
        case Select(x, label, cont):
            return f"{x}.{label}.{render_process(cont, _PREFIX)}"
        case Case(x, left, right):
            return f"case {x} {{ {render_process(left)} ; {render_process(right)} }}"
        case New(x, body):
            return f"new {x} {{ {render_process(body)} }}"
        case Call(name, args):
            return f"{name}({', '.join(render_message(a) for a in args)})"
        case PChoice(prob, left, right):
            s = f"{render_process(left, _PREFIX)} +[{render_prob(prob)}] {render_process(right, _CHOICE)}"
            return f"({s})" if level > _CHOICE else s
        case Par(left, x, t, right):
            s = f"{render_process(left, _PAR)} |[{x}: {render_type(t)}]| {render_process(right, _CHOICE)}"
            return f"({s})" if level > _PAR else s
    raise TypeError(f"not a process: {p!r}")


def render(prog: Program) -> str:
    lines = []
    for name in prog.types.user_names:
        lines.append(f"type {name} = {render_type(prog.types[name])}")
    for d in prog.defs.values():
        params = ", ".join(f"{x}: {render_type(t)}" for x, t in d.params)
        lines.append(f"def {d.name}({params}) = {render_process(d.body)}")
    if prog.main is not None:
        lines.append(f"main = {render_process(prog.main)}")
    return "\n".join(lines) + "\n"
