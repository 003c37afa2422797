"""Recursive-descent parser for the program language.

Besides building the AST this resolves type and process names, checks call
arities and probability ranges, and renames binders that would shadow a
name already bound further out (so every binder on a path is distinct).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from probsess.syntax import (
    Base,
    Branch,
    Call,
    Case,
    Choice,
    Completed,
    Definition,
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
from probsess.typeops import TypeDefinitionError, TypeTable, dual

KEYWORDS = {
    "type", "def", "main", "idle", "done", "case", "new",
    "end", "int", "unit", "left", "right",
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Token:
    kind: str  # "name", "nat", "int", "decimal", "kw", "sym", "eof"
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<decimal>\d+\.\d+)
  | (?P<int>-\d+)
  | (?P<nat>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\#\[|\|\[|\]\||\+\[|&\[|[()\[\]{};,:=.!?~/])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            word = m.group()
            if kind == "name" and word in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, word, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.used_names = {t.text for t in self.tokens if t.kind == "name"}
        self.type_uses: list[tuple[str, Token]] = []
        self.calls: list[tuple[Call, Token]] = []

    # -- token helpers -------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "kw")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self, what: str = "name") -> Token:
        if self.tok.kind != "name":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def fresh(self, base: str) -> str:
        k = 1
        while f"{base}_{k}" in self.used_names:
            k += 1
        name = f"{base}_{k}"
        self.used_names.add(name)
        return name

    # -- numbers -------------------------------------------------------
    def prob(self) -> Fraction:
        t = self.tok
        if t.kind == "decimal":
            self.i += 1
            value = Fraction(t.text)
        elif t.kind == "nat":
            self.i += 1
            value = Fraction(int(t.text))
            if self.at("/"):
                self.i += 1
                d = self.tok
                if d.kind != "nat":
                    raise self.error("expected denominator")
                self.i += 1
                if int(d.text) == 0:
                    raise self.error("zero denominator", d)
                value /= int(d.text)
        else:
            raise self.error("expected a probability")
        if not 0 <= value <= 1:
            raise self.error(f"probability {t.text} out of range [0, 1]", t)
        return value

    # -- types ---------------------------------------------------------
    def vtype(self):
        if self.at("int") or self.at("unit"):
            return Base(self.expect(self.tok.text).text)
        if self.at("#["):
            self.i += 1
            p = self.prob()
            self.expect("]")
            return Completed(p)
        return self.stype()

    def stype(self):
        t = self.tok
        if self.at("end"):
            self.i += 1
            return EndFail()
        if self.at("done"):
            self.i += 1
            return EndSucc()
        if self.at("?") or self.at("!"):
            self.i += 1
            payload = self.vtype()
            self.expect(".")
            cont = self.stype()
            return In(payload, cont) if t.text == "?" else Out(payload, cont)
        if self.at("&[") or self.at("+["):
            self.i += 1
            p = self.prob()
            self.expect("]")
            self.expect("{")
            left = self.stype()
            self.expect(";")
            right = self.stype()
            self.expect("}")
            return Branch(p, left, right) if t.text == "&[" else Choice(p, left, right)
        if self.at("~"):
            self.i += 1
            return dual(self.stype())
        if self.at("("):
            self.i += 1
            inner = self.stype()
            self.expect(")")
            return inner
        if t.kind == "name":
            self.i += 1
            self.type_uses.append((t.text, t))
            return Ref(t.text)
        raise self.error(f"expected a session type, found {t.text or 'end of input'!r}")

    # -- processes -----------------------------------------------------
    def process(self, scope: dict[str, str]):
        left = self.choice(scope)
        while self.at("|["):
            self.i += 1
            x = self.use(self.name("cut name"), scope)
            self.expect(":")
            t = self.stype()
            self.expect("]|")
            right = self.choice(scope)
            left = Par(left, x, t, right)
        return left

    def choice(self, scope):
        left = self.prefix(scope)
        if self.at("+["):
            self.i += 1
            p = self.prob()
            self.expect("]")
            return PChoice(p, left, self.choice(scope))
        return left

    def use(self, tok: Token, scope: dict[str, str]) -> str:
        return scope.get(tok.text, tok.text)

    def bind(self, tok: Token, scope: dict[str, str]) -> tuple[str, dict[str, str]]:
        name = tok.text
        if name in scope or name in scope.values():
            name = self.fresh(name)
        return name, {**scope, tok.text: name}

    def message(self, scope):
        t = self.tok
        if t.kind in ("nat", "int"):
            self.i += 1
            return IntLit(int(t.text))
        if self.at("(") and self.peek().text == ")":
            self.i += 2
            return UnitLit()
        return self.use(self.name("message"), scope)

    def prefix(self, scope):
        t = self.tok
        if self.at("idle"):
            self.i += 1
            return Idle()
        if self.at("done"):
            self.i += 1
            return Done(self.use(self.name("channel"), scope))
        if self.at("case"):
            self.i += 1
            x = self.use(self.name("channel"), scope)
            self.expect("{")
            left = self.process(scope)
            self.expect(";")
            right = self.process(scope)
            self.expect("}")
            return Case(x, left, right)
        if self.at("new"):
            self.i += 1
            x, inner = self.bind(self.name("channel"), scope)
            self.expect("{")
            body = self.process(inner)
            self.expect("}")
            return New(x, body)
        if self.at("("):
            self.i += 1
            inner = self.process(scope)
            self.expect(")")
            return inner
        if t.kind != "name":
            raise self.error(f"expected a process, found {t.text or 'end of input'!r}")
        nxt = self.peek()
        if nxt.text == "(":
            return self.call(scope)
        x = self.use(t, scope)
        self.i += 1
        if self.at("?"):
            self.i += 1
            self.expect("(")
            y, inner = self.bind(self.name("binder"), scope)
            self.expect(")")
            self.expect(".")
            return Recv(x, y, self.prefix(inner))
        if self.at("!"):
            self.i += 1
            m = self.message(scope)
            self.expect(".")
            return Send(x, m, self.prefix(scope))
        if self.at("."):
            self.i += 1
            if not (self.at("left") or self.at("right")):
                raise self.error("expected 'left' or 'right'")
            label = self.tok.text
            self.i += 1
            self.expect(".")
            return Select(x, label, self.prefix(scope))
        raise self.error(f"expected '?', '!' or '.' after {t.text!r}")

    def call(self, scope):
        t = self.name("process name")
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.message(scope))
            while self.at(","):
                self.i += 1
                args.append(self.message(scope))
        self.expect(")")
        c = Call(t.text, tuple(args))
        self.calls.append((c, t))
        return c

    # -- top level -----------------------------------------------------
    def program(self) -> Program:
        types: dict[str, object] = {}
        defs: dict[str, Definition] = {}
        main = None
        while self.tok.kind != "eof":
            if self.at("type"):
                self.i += 1
                t = self.name("type name")
                if t.text in types:
                    raise self.error(f"type {t.text} defined twice", t)
                self.expect("=")
                types[t.text] = self.stype()
            elif self.at("def"):
                self.i += 1
                t = self.name("process name")
                if t.text in defs:
                    raise self.error(f"process {t.text} defined twice", t)
                self.expect("(")
                params = []
                scope: dict[str, str] = {}
                if not self.at(")"):
                    while True:
                        pt = self.name("parameter")
                        if pt.text in scope:
                            raise self.error(f"duplicate parameter {pt.text}", pt)
                        self.expect(":")
                        params.append((pt.text, self.vtype()))
                        scope[pt.text] = pt.text
                        if not self.at(","):
                            break
                        self.i += 1
                self.expect(")")
                self.expect("=")
                defs[t.text] = Definition(t.text, tuple(params), self.process(scope))
            elif self.at("main"):
                if main is not None:
                    raise self.error("main defined twice")
                self.i += 1
                self.expect("=")
                main = self.process({})
            else:
                raise self.error(f"expected 'type', 'def' or 'main', found {self.tok.text!r}")

        for name, tok in self.type_uses:
            if name not in types and not (name.startswith("~") and name[1:] in types):
                raise self.error(f"unknown type name {name}", tok)
        try:
            table = TypeTable(types)
        except TypeDefinitionError as e:
            raise ParseError(str(e)) from None
        for call, tok in self.calls:
            d = defs.get(call.name)
            if d is None:
                raise self.error(f"unknown process {call.name}", tok)
            if len(d.params) != len(call.args):
                raise self.error(
                    f"{call.name} expects {len(d.params)} argument(s), got {len(call.args)}", tok
                )
        return Program(table, defs, main)


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def parse_type(text: str, table: TypeTable | None = None):
    """Parse a single session or value type; names must exist in ``table``."""
    p = _Parser(text)
    t = p.vtype()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after type")
    known = table if table is not None else {}
    for name, tok in p.type_uses:
        if name not in known:
            raise p.error(f"unknown type name {name}", tok)
    return t


def parse_process(text: str):
    p = _Parser(text)
    proc = p.process({})
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after process")
    return proc
