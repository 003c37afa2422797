"""Operations on (possibly recursive) session types.

Recursive types are given by a table of equations ``N = body``. For every
user entry ``N`` the table also holds its dual under the name ``~N``, so
duality never has to invent names later and the table stays closed.
"""

from __future__ import annotations

from collections.abc import Mapping
from fractions import Fraction

from probsess.syntax import (
    Base,
    Branch,
    Choice,
    Completed,
    EndFail,
    EndSucc,
    In,
    Out,
    Ref,
    SESSION_TYPES,
    SessionType,
    ValueType,
)

DUAL_PREFIX = "~"


class TypeDefinitionError(ValueError):
    pass


def dual_name(name: str) -> str:
    if name.startswith(DUAL_PREFIX):
        return name[len(DUAL_PREFIX):]
    return DUAL_PREFIX + name


def _dual_syntax(t: SessionType) -> SessionType:
    match t:
        case EndFail() | EndSucc():
            return t
        case In(payload, cont):
            return Out(payload, _dual_syntax(cont))
        case Out(payload, cont):
            return In(payload, _dual_syntax(cont))
        case Branch(p, l, r):
            return Choice(p, _dual_syntax(l), _dual_syntax(r))
        case Choice(p, l, r):
            return Branch(p, _dual_syntax(l), _dual_syntax(r))
        case Ref(name):
            return Ref(dual_name(name))
    raise TypeError(f"not a session type: {t!r}")


def _refs(t: ValueType, out: set[str]) -> None:
    match t:
        case Ref(name):
            out.add(name)
        case In(payload, cont) | Out(payload, cont):
            _refs(payload, out)
            _refs(cont, out)
        case Branch(_, l, r) | Choice(_, l, r):
            _refs(l, out)
            _refs(r, out)


class TypeTable(Mapping[str, SessionType]):
    """Named session-type equations, closed under duality.

    Raises :class:`TypeDefinitionError` for unknown names or for equations
    like ``A = B, B = A`` that never reach a type constructor.
    """

    def __init__(self, entries: Mapping[str, SessionType] | None = None):
        entries = dict(entries or {})
        for name in entries:
            if name.startswith(DUAL_PREFIX):
                raise TypeDefinitionError(f"type names may not start with {DUAL_PREFIX!r}: {name}")
        self._user = tuple(entries)
        self._entries: dict[str, SessionType] = dict(entries)
        for name, body in entries.items():
            self._entries[dual_name(name)] = _dual_syntax(body)
        for name, body in entries.items():
            self.check_closed(body, where=f"type {name}")
        self._check_contractive()

    def __getitem__(self, name: str) -> SessionType:
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def user_names(self) -> tuple[str, ...]:
        """Names written by the user, in definition order (duals excluded)."""
        return self._user

    def check_closed(self, t: ValueType, where: str = "type") -> None:
        names: set[str] = set()
        _refs(t, names)
        missing = sorted(n for n in names if n not in self._entries)
        if missing:
            raise TypeDefinitionError(f"{where}: unknown type name {missing[0]}")

    def _check_contractive(self) -> None:
        for start in self._entries:
            seen = {start}
            t = self._entries[start]
            while isinstance(t, Ref):
                if t.name in seen:
                    raise TypeDefinitionError(f"type {start} is not contractive")
                seen.add(t.name)
                t = self._entries[t.name]

    def __repr__(self) -> str:
        return f"TypeTable({ {n: self._entries[n] for n in self._user} !r})"


EMPTY_TABLE = TypeTable()


def unfold(t: ValueType, table: Mapping[str, SessionType]) -> ValueType:
    """Resolve references until a type constructor is at the head."""
    while isinstance(t, Ref):
        t = table[t.name]
    return t


def dual(t: SessionType, table: TypeTable | None = None) -> SessionType:
    """Dual endpoint type. References map to the table's ``~N`` entries."""
    if not isinstance(t, SESSION_TYPES):
        raise TypeError(f"dual is defined on session types only, got {t!r}")
    return _dual_syntax(t)


def is_session_type(t: ValueType) -> bool:
    return isinstance(t, SESSION_TYPES)


def type_equal(t1: ValueType, t2: ValueType, table: Mapping[str, SessionType]) -> bool:
    """Equality of the regular trees denoted by ``t1`` and ``t2``."""
    seen: set[tuple[ValueType, ValueType]] = set()
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        if (a, b) in seen:
            continue
        seen.add((a, b))
        a, b = unfold(a, table), unfold(b, table)
        if type(a) is not type(b):
            return False
        match a:
            case EndFail() | EndSucc():
                pass
            case Base(name):
                if name != b.name:
                    return False
            case Completed(p):
                if p != b.p:
                    return False
            case In(pay, cont) | Out(pay, cont):
                stack.append((pay, b.payload))
                stack.append((cont, b.cont))
            case Branch(p, l, r) | Choice(p, l, r):
                if p != b.p:
                    return False
                stack.append((l, b.left))
                stack.append((r, b.right))
            case _:
                raise TypeError(f"not a type: {a!r}")
    return True


def is_unrestricted(t: ValueType, table: Mapping[str, SessionType]) -> bool:
    return isinstance(unfold(t, table), (EndFail, Base))


def is_safe(t: ValueType, table: Mapping[str, SessionType]) -> bool:
    return not isinstance(unfold(t, table), Branch)


def is_balanced(ctx: Mapping[str, ValueType], table: Mapping[str, SessionType]) -> bool:
    return all(
        is_unrestricted(t, table) or isinstance(t, Completed) for t in ctx.values()
    )


def combine(
    p: Fraction, t: ValueType, s: ValueType, table: Mapping[str, SessionType]
) -> ValueType | None:
    """``t`` and ``s`` weighed by ``p``; ``None`` where the combination is undefined."""
    if type_equal(t, s, table):
        return t
    ut, us = unfold(t, table), unfold(s, table)
    match ut, us:
        case Choice(q, tl, tr), Choice(r, sl, sr):
            if type_equal(tl, sl, table) and type_equal(tr, sr, table):
                return Choice(p * q + (1 - p) * r, tl, tr)
        case Completed(q), Completed(r):
            return Completed(p * q + (1 - p) * r)
    return None


def combine_context(
    p: Fraction,
    ctx1: Mapping[str, ValueType],
    ctx2: Mapping[str, ValueType],
    table: Mapping[str, SessionType],
) -> dict[str, ValueType] | None:
    if set(ctx1) != set(ctx2):
        return None
    out = {}
    for name, t in ctx1.items():
        c = combine(p, t, ctx2[name], table)
        if c is None:
            return None
        out[name] = c
    return out
