"""Abstract syntax for session types, processes and programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Union

if TYPE_CHECKING:
    from probsess.typeops import TypeTable

# ---------------------------------------------------------------------------
# Types
#
# Probability annotations on Choice and Completed are usually Fractions. The
# checker may temporarily put a symbolic linear expression there (see
# checker.Lin); nothing outside the checker ever sees one.


@dataclass(frozen=True)
class EndFail:
    """Unsuccessful termination."""

    def __str__(self) -> str:
        return "end"


@dataclass(frozen=True)
class EndSucc:
    """Successful termination."""

    def __str__(self) -> str:
        return "done"


@dataclass(frozen=True)
class In:
    payload: ValueType
    cont: SessionType


@dataclass(frozen=True)
class Out:
    payload: ValueType
    cont: SessionType


@dataclass(frozen=True)
class Branch:
    p: Fraction
    left: SessionType
    right: SessionType


@dataclass(frozen=True)
class Choice:
    p: object  # Fraction, or a checker.Lin while checking
    left: SessionType
    right: SessionType


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Completed:
    """The type ``#p`` of a session whose two endpoints are both owned."""

    p: object  # Fraction, or a checker.Lin while checking


@dataclass(frozen=True)
class Base:
    name: str  # "int" | "unit"

    def __post_init__(self) -> None:
        if self.name not in ("int", "unit"):
            raise ValueError(f"unknown base type {self.name!r}")


SessionType = Union[EndFail, EndSucc, In, Out, Branch, Choice, Ref]
ValueType = Union[EndFail, EndSucc, In, Out, Branch, Choice, Ref, Completed, Base]

SESSION_TYPES = (EndFail, EndSucc, In, Out, Branch, Choice, Ref)

INT = Base("int")
UNIT = Base("unit")

# ---------------------------------------------------------------------------
# Processes


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class UnitLit:
    pass


Message = Union[str, IntLit, UnitLit]


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Done:
    chan: str


@dataclass(frozen=True)
class Recv:
    chan: str
    binder: str
    cont: Process


@dataclass(frozen=True)
class Send:
    chan: str
    msg: Message
    cont: Process


@dataclass(frozen=True)
class Case:
    chan: str
    left: Process
    right: Process


@dataclass(frozen=True)
class Select:
    chan: str
    label: str  # "left" | "right"
    cont: Process

    def __post_init__(self) -> None:
        if self.label not in ("left", "right"):
            raise ValueError(f"bad selection label {self.label!r}")


@dataclass(frozen=True)
class Par:
    left: Process
    cut: str
    cut_type: SessionType
    right: Process


@dataclass(frozen=True)
class New:
    chan: str
    body: Process


@dataclass(frozen=True)
class PChoice:
    p: Fraction
    left: Process
    right: Process


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Message, ...]


Process = Union[Idle, Done, Recv, Send, Case, Select, Par, New, PChoice, Call]

PREFIXED = (Recv, Send, Case, Select)
SEQUENTIAL = (Recv, Send, Case, Select, Idle, Done, Call)


def free_names(p: Process) -> frozenset[str]:
    match p:
        case Idle():
            return frozenset()
        case Done(x):
            return frozenset({x})
        case Recv(x, y, q):
            return (free_names(q) - {y}) | {x}
        case Send(x, m, q):
            extra = {m} if isinstance(m, str) else set()
            return free_names(q) | {x} | extra
        case Case(x, l, r):
            return free_names(l) | free_names(r) | {x}
        case Select(x, _, q):
            return free_names(q) | {x}
        case Par(l, x, _, r):
            return free_names(l) | free_names(r) | {x}
        case New(x, q):
            return free_names(q) - {x}
        case PChoice(_, l, r):
            return free_names(l) | free_names(r)
        case Call(_, args):
            return frozenset(a for a in args if isinstance(a, str))
    raise TypeError(f"not a process: {p!r}")


def all_names(p: Process) -> set[str]:
    """Every channel name mentioned in ``p``, free or bound."""
    out: set[str] = set()

    def go(q: Process) -> None:
        match q:
            case Done(x):
                out.add(x)
            case Recv(x, y, c):
                out.update((x, y))
                go(c)
            case Send(x, m, c):
                out.add(x)
                if isinstance(m, str):
                    out.add(m)
                go(c)
            case Case(x, l, r):
                out.add(x)
                go(l)
                go(r)
            case Select(x, _, c):
                out.add(x)
                go(c)
            case Par(l, x, _, r):
                out.add(x)
                go(l)
                go(r)
            case New(x, c):
                out.add(x)
                go(c)
            case PChoice(_, l, r):
                go(l)
                go(r)
            case Call(_, args):
                out.update(a for a in args if isinstance(a, str))

    go(p)
    return out


def substitute(p: Process, mapping: dict[str, Message]) -> Process:
    """Replace free names. Callers guarantee no capture (binders are fresh)."""
    if not mapping:
        return p

    def name(x: str) -> str:
        m = mapping.get(x, x)
        if not isinstance(m, str):
            raise ValueError(f"cannot substitute literal for channel {x!r}")
        return m

    match p:
        case Idle():
            return p
        case Done(x):
            return Done(name(x))
        case Recv(x, y, q):
            inner = {k: v for k, v in mapping.items() if k != y}
            return Recv(name(x), y, substitute(q, inner))
        case Send(x, m, q):
            msg = mapping.get(m, m) if isinstance(m, str) else m
            return Send(name(x), msg, substitute(q, mapping))
        case Case(x, l, r):
            return Case(name(x), substitute(l, mapping), substitute(r, mapping))
        case Select(x, lab, q):
            return Select(name(x), lab, substitute(q, mapping))
        case Par(l, x, t, r):
            return Par(substitute(l, mapping), name(x), t, substitute(r, mapping))
        case New(x, q):
            inner = {k: v for k, v in mapping.items() if k != x}
            return New(x, substitute(q, inner))
        case PChoice(prob, l, r):
            return PChoice(prob, substitute(l, mapping), substitute(r, mapping))
        case Call(a, args):
            return Call(a, tuple(mapping.get(x, x) if isinstance(x, str) else x for x in args))
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Programs


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[tuple[str, ValueType], ...]
    body: Process


@dataclass
class Program:
    types: TypeTable
    defs: dict[str, Definition] = field(default_factory=dict)
    main: Process | None = None

