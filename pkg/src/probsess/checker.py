"""Type checking by constraint generation.

The rules for branching and probabilistic choice split the context into two
contexts whose weighted combination is the original. Only the annotations
of internal choices and of completed sessions can differ between the two
halves, so each such annotation becomes a pair of fresh unknowns in [0, 1]
tied to the original by ``p*v1 + (1-p)*v2 = r``. The weight ``p`` is always
a concrete rational, so every constraint is linear; a definition is well
typed exactly when the resulting system is feasible.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import count

from probsess.analysis import WellFormednessError, success_prob
from probsess.numeric import Infeasible, LinearSystem, feasible
from probsess.printer import render_prob, render_process, render_type
from probsess.syntax import (
    Base,
    Branch,
    Call,
    Case,
    Choice,
    Completed,
    Done,
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
    Select,
    Send,
    UnitLit,
    free_names,
)
from probsess.typeops import dual, is_safe, is_unrestricted, type_equal, unfold


@dataclass(frozen=True)
class Lin:
    """``const + sum(coef * var)`` with rational coefficients."""

    terms: tuple[tuple[str, Fraction], ...] = ()
    const: Fraction = Fraction(0)

    @staticmethod
    def var(name: str) -> Lin:
        return Lin(((name, Fraction(1)),))

    @staticmethod
    def of(value) -> Lin:
        return value if isinstance(value, Lin) else Lin((), Fraction(value))

    def __add__(self, other) -> Lin:
        other = Lin.of(other)
        acc = dict(self.terms)
        for v, c in other.terms:
            acc[v] = acc.get(v, Fraction(0)) + c
        return Lin(tuple(sorted((v, c) for v, c in acc.items() if c)), self.const + other.const)

    def __sub__(self, other) -> Lin:
        return self + Lin.of(other).scale(-1)

    def scale(self, k) -> Lin:
        k = Fraction(k)
        return Lin(tuple((v, c * k) for v, c in self.terms if c * k), self.const * k)

    def is_const(self) -> bool:
        return not self.terms

    def evaluate(self, assignment: Mapping[str, Fraction]) -> Fraction:
        return self.const + sum((c * assignment[v] for v, c in self.terms), Fraction(0))

    def __str__(self) -> str:
        parts = [f"{render_prob(c)}*{v}" for v, c in self.terms]
        if self.const or not parts:
            parts.append(render_prob(self.const))
        return " + ".join(parts)


def _simplify(value):
    if isinstance(value, Lin) and value.is_const():
        return value.const
    return value


class ConstraintSystem:
    """Unknowns in [0, 1] and linear equalities over them."""

    def __init__(self) -> None:
        self.variables: list[str] = []
        self.equations: list[tuple[dict[str, Fraction], Fraction]] = []
        self._ids = count(1)

    def fresh(self, prefix: str = "v") -> Lin:
        name = f"{prefix}{next(self._ids)}"
        self.variables.append(name)
        return Lin.var(name)

    def equate(self, a, b) -> None:
        """Record ``a = b``; returns silently when trivially true."""
        diff = Lin.of(a) - Lin.of(b)
        if diff.is_const():
            if diff.const != 0:
                self.equations.append(({}, -diff.const))
            return
        self.equations.append((dict(diff.terms), -diff.const))

    def __len__(self) -> int:
        return len(self.equations)

    def linear_system(self) -> LinearSystem:
        bounds = {v: (Fraction(0), Fraction(1)) for v in self.variables}
        return LinearSystem.from_sparse(self.variables, self.equations, bounds)

    def solve(self) -> dict[str, Fraction]:
        """A satisfying assignment; raises :class:`numeric.Infeasible`."""
        return feasible(self.linear_system())


class TypingError(Exception):
    def __init__(self, rule: str, message: str, subterm=None):
        self.rule = rule
        self.subterm = subterm
        self.message = message
        super().__init__(f"{rule}: {message}")

    def describe(self) -> str:
        text = f"[{self.rule}] {self.message}"
        if self.subterm is not None:
            text += f"\n  in: {render_process(self.subterm)}"
        return text


def _show(t) -> str:
    match t:
        case Choice(p, l, r):
            return f"+[{_simplify(p)}]{{{render_type(l)}; {render_type(r)}}}"
        case Completed(p):
            return f"#[{_simplify(p)}]"
    return render_type(t)


class Checker:
    """Typing rules against the type table and signatures of ``program``."""

    def __init__(self, program: Program):
        self.program = program
        self.table = program.types
        self._pr: dict[object, Fraction] = {}

    # -- helpers -------------------------------------------------------
    def pr(self, t) -> Fraction:
        if t not in self._pr:
            self._pr[t] = success_prob(t, self.table)
        return self._pr[t]

    def _head(self, t):
        return unfold(t, self.table)

    def _unrestricted(self, ctx, proc, rule: str, keep=()) -> None:
        for name, t in ctx.items():
            if name in keep:
                continue
            if isinstance(t, (Choice, Completed)) or not is_unrestricted(t, self.table):
                raise TypingError(rule, f"{name} : {_show(t)} is left unused", proc)

    def equal(self, actual, expected, acc: ConstraintSystem) -> bool:
        """Type equality where top-level annotations may be unknowns."""
        a, b = self._head(actual), self._head(expected)
        if isinstance(a, Choice) and isinstance(b, Choice):
            if not (type_equal(a.left, b.left, self.table) and type_equal(a.right, b.right, self.table)):
                return False
            return self._ann_equal(a.p, b.p, acc)
        if isinstance(a, Completed) and isinstance(b, Completed):
            return self._ann_equal(a.p, b.p, acc)
        return type_equal(a, b, self.table)

    @staticmethod
    def _ann_equal(p, q, acc: ConstraintSystem) -> bool:
        p, q = _simplify(p), _simplify(q)
        if isinstance(p, Fraction) and isinstance(q, Fraction):
            return p == q
        acc.equate(p, q)
        return True

    def split(self, ctx, weight: Fraction, acc: ConstraintSystem):
        """Two contexts whose ``weight``-combination is ``ctx``."""
        left, right = {}, {}
        for name, t in ctx.items():
            h = self._head(t)
            if isinstance(h, (Choice, Completed)):
                v1, v2 = acc.fresh(), acc.fresh()
                acc.equate(v1.scale(weight) + v2.scale(1 - weight), Lin.of(h.p))
                if isinstance(h, Choice):
                    left[name] = Choice(v1, h.left, h.right)
                    right[name] = Choice(v2, h.left, h.right)
                else:
                    left[name] = Completed(v1)
                    right[name] = Completed(v2)
            else:
                left[name] = right[name] = t
        return left, right

    def _lookup(self, ctx, x: str, rule: str, proc):
        if x not in ctx:
            raise TypingError(rule, f"{x} is not in the context", proc)
        return self._head(ctx[x])

    def _message_type(self, m, ctx, rule: str, proc):
        if isinstance(m, IntLit):
            return Base("int")
        if isinstance(m, UnitLit):
            return Base("unit")
        if m not in ctx:
            raise TypingError(rule, f"{m} is not in the context", proc)
        return ctx[m]

    # -- rules ---------------------------------------------------------
    def check(self, ctx: dict, proc, acc: ConstraintSystem) -> ConstraintSystem:
        match proc:
            case Idle():
                self._unrestricted(ctx, proc, "t-idle")
            case Done(x):
                h = self._lookup(ctx, x, "t-done", proc)
                if not isinstance(h, EndSucc):
                    raise TypingError("t-done", f"{x} : {_show(h)}, expected done", proc)
                self._unrestricted(ctx, proc, "t-done", keep=(x,))
            case Call(name, args):
                self._call(ctx, proc, name, args, acc)
            case Recv(x, y, cont):
                h = self._lookup(ctx, x, "t-in", proc)
                if not isinstance(h, In):
                    raise TypingError("t-in", f"{x} : {_show(h)} is not an input", proc)
                if y in ctx:
                    raise TypingError("t-in", f"binder {y} shadows a name in the context", proc)
                self.check({**ctx, x: h.cont, y: h.payload}, cont, acc)
            case Send(x, m, cont):
                h = self._lookup(ctx, x, "t-out", proc)
                if not isinstance(h, Out):
                    raise TypingError("t-out", f"{x} : {_show(h)} is not an output", proc)
                if m == x:
                    raise TypingError("t-out", f"{x} cannot be sent over itself", proc)
                t = self._message_type(m, ctx, "t-out", proc)
                if not is_safe(h.payload, self.table):
                    raise TypingError("t-out", f"message type {_show(h.payload)} is not safe", proc)
                if not self.equal(t, h.payload, acc):
                    raise TypingError(
                        "t-out", f"message has type {_show(t)}, expected {_show(h.payload)}", proc
                    )
                rest = {k: v for k, v in ctx.items() if k != m}
                rest[x] = h.cont
                self.check(rest, cont, acc)
            case Select(x, label, cont):
                rule = "t-left" if label == "left" else "t-right"
                h = self._lookup(ctx, x, rule, proc)
                if not isinstance(h, Choice):
                    raise TypingError(rule, f"{x} : {_show(h)} is not an internal choice", proc)
                want = Fraction(1) if label == "left" else Fraction(0)
                p = _simplify(h.p)
                if isinstance(p, Fraction):
                    if p != want:
                        raise TypingError(
                            rule, f"{x} : {_show(h)} but a {label} selection needs [{want}]", proc
                        )
                else:
                    acc.equate(p, want)
                cont_type = h.left if label == "left" else h.right
                self.check({**ctx, x: cont_type}, cont, acc)
            case Case(x, left, right):
                h = self._lookup(ctx, x, "t-branch", proc)
                if not isinstance(h, Branch):
                    raise TypingError("t-branch", f"{x} : {_show(h)} is not a branch", proc)
                rest = {k: v for k, v in ctx.items() if k != x}
                c1, c2 = self.split(rest, h.p, acc)
                self.check({**c1, x: h.left}, left, acc)
                self.check({**c2, x: h.right}, right, acc)
            case PChoice(p, left, right):
                c1, c2 = self.split(ctx, p, acc)
                self.check(c1, left, acc)
                self.check(c2, right, acc)
            case Par(left, x, t, right):
                self._par(ctx, proc, left, x, t, right, acc)
            case New(x, body):
                if x in ctx:
                    raise TypingError("t-new", f"restricted name {x} shadows a name in the context", proc)
                self.check({**ctx, x: Completed(acc.fresh())}, body, acc)
            case _:
                raise TypeError(f"not a process: {proc!r}")
        return acc

    def _call(self, ctx, proc, name, args, acc) -> None:
        d = self.program.defs.get(name)
        if d is None:
            raise TypingError("t-var", f"unknown process {name}", proc)
        if len(d.params) != len(args):
            raise TypingError("t-var", f"{name} expects {len(d.params)} argument(s)", proc)
        seen = set()
        for arg, (_, declared) in zip(args, d.params):
            if not is_safe(declared, self.table):
                raise TypingError("t-var", f"parameter type {_show(declared)} is not safe", proc)
            if isinstance(arg, str):
                if arg in seen:
                    raise TypingError("t-var", f"{arg} is passed twice", proc)
                seen.add(arg)
            t = self._message_type(arg, ctx, "t-var", proc)
            if not self.equal(t, declared, acc):
                raise TypingError("t-var", f"argument has type {_show(t)}, expected {_show(declared)}", proc)
        self._unrestricted(ctx, proc, "t-var", keep=seen)

    def _par(self, ctx, proc, left, x, t, right, acc) -> None:
        fl, fr = free_names(left), free_names(right)
        shared = (fl & fr) - {x}
        if shared:
            raise TypingError("t-par", f"both sides use {', '.join(sorted(shared))}", proc)
        if x not in ctx:
            raise TypingError("t-par", f"cut {x} is not in the context", proc)
        here = ctx[x]
        if not isinstance(here, Completed):
            raise TypingError("t-par", f"cut {x} : {_show(here)} is not a completed session", proc)
        try:
            p = self.pr(t)
        except WellFormednessError as e:
            raise TypingError("t-par", f"cut type is not well formed ({e})", proc) from None
        if not self._ann_equal(here.p, p, acc):
            raise TypingError("t-par", f"cut {x} : {_show(here)} but the session succeeds with {p}", proc)
        lctx, rctx = {}, {}
        for name, ty in ctx.items():
            if name == x:
                continue
            (rctx if name in fr else lctx)[name] = ty
        lctx[x] = t
        rctx[x] = dual(t)
        self.check(lctx, left, acc)
        self.check(rctx, right, acc)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Verdict:
    name: str
    ok: bool
    constraints: int = 0
    rule: str | None = None
    error: str | None = None
    subterm: str | None = None
    context: dict[str, Fraction] | None = None
    assignment: dict[str, Fraction] | None = None

    def record(self) -> dict:
        rec = {"name": self.name, "verdict": "accepted" if self.ok else "rejected",
               "constraints": self.constraints}
        if self.context is not None:
            rec["context"] = {k: render_prob(v) for k, v in self.context.items()}
        if not self.ok:
            rec["rule"] = self.rule
            rec["error"] = self.error
        return rec

    def text(self) -> str:
        if self.ok:
            extra = ""
            if self.context is not None:
                extra = ": " + ", ".join(f"{k} : #[{render_prob(v)}]" for k, v in self.context.items())
            return f"{self.name}: OK{extra}"
        where = f"\n  in: {self.subterm}" if self.subterm else ""
        return f"{self.name}: REJECTED [{self.rule}] {self.error}{where}"


@dataclass
class CheckReport:
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return all(v.ok for v in self.verdicts)

    @property
    def main(self) -> Verdict | None:
        return next((v for v in self.verdicts if v.name == "main"), None)

    @property
    def main_context(self) -> dict[str, Fraction] | None:
        m = self.main
        return m.context if m is not None and m.ok else None

    def __getitem__(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def text(self) -> str:
        return "\n".join(v.text() for v in self.verdicts)

    def json_lines(self) -> str:
        return "\n".join(json.dumps(v.record(), sort_keys=True) for v in self.verdicts)


def solve_and_report(name: str, acc: ConstraintSystem) -> Verdict:
    try:
        assignment = acc.solve()
    except Infeasible:
        return Verdict(name, False, len(acc), "constraints", "infeasible constraint system")
    return Verdict(name, True, len(acc), assignment=assignment)


def check_process(program: Program, ctx: Mapping, proc, acc: ConstraintSystem | None = None) -> ConstraintSystem:
    """Generate constraints for ``proc`` under ``ctx``; raises :class:`TypingError`."""
    acc = acc if acc is not None else ConstraintSystem()
    return Checker(program).check(dict(ctx), proc, acc)


def _run(name: str, checker: Checker, ctx, proc) -> tuple[Verdict, ConstraintSystem]:
    acc = ConstraintSystem()
    try:
        checker.check(ctx, proc, acc)
    except TypingError as e:
        sub = render_process(e.subterm) if e.subterm is not None else None
        return Verdict(name, False, len(acc), e.rule, e.message, sub), acc
    return solve_and_report(name, acc), acc


def check_definition(program: Program, name: str, checker: Checker | None = None) -> Verdict:
    checker = checker or Checker(program)
    d = program.defs[name]
    return _run(name, checker, dict(d.params), d.body)[0]


def check_main(program: Program, checker: Checker | None = None) -> Verdict:
    """Check ``main`` with a ``#p`` unknown for each free name and report the ``p``s."""
    checker = checker or Checker(program)
    acc = ConstraintSystem()
    names = sorted(free_names(program.main))
    ctx = {x: Completed(acc.fresh("m")) for x in names}
    try:
        checker.check(ctx, program.main, acc)
    except TypingError as e:
        sub = render_process(e.subterm) if e.subterm is not None else None
        return Verdict("main", False, len(acc), e.rule, e.message, sub)
    verdict = solve_and_report("main", acc)
    if verdict.ok:
        verdict.context = {x: Lin.of(ctx[x].p).evaluate(verdict.assignment) for x in names}
    return verdict


def check_program(program: Program) -> CheckReport:
    checker = Checker(program)
    report = CheckReport()
    for name in program.defs:
        report.verdicts.append(check_definition(program, name, checker))
    if program.main is not None:
        report.verdicts.append(check_main(program, checker))
    return report


def check_closed(program: Program, proc, context: Mapping[str, Fraction]) -> Verdict:
    """Check ``proc`` against a fixed context of completed sessions."""
    ctx = {x: Completed(Fraction(p)) for x, p in context.items()}
    return _run("main", Checker(program), ctx, proc)[0]
