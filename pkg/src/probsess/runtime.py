"""Execution under persistent probabilistic choice.

A run state keeps every branch of every probabilistic choice: it is a
binary tree of weighted alternatives whose leaves are flat lists of
sequential processes. Each round expands the process calls at the head of
every leaf, fires at most one communication per leaf and normalises again.

In *typed* mode every sequential process also carries its own typing
context. When a choice is pulled out of a process its context is split the
way the typing rule for choices prescribes, and the split is propagated to
the partners whose branch annotations it changes. This is what makes it
possible to print a state back as a program and type-check it again.
"""

from __future__ import annotations

import random
from collections import deque
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction

from probsess.checker import Checker, ConstraintSystem, Lin
from probsess.numeric import Infeasible
from probsess.syntax import (
    Branch,
    Call,
    Case,
    Choice,
    Completed,
    Done,
    EndFail,
    Idle,
    New,
    Par,
    PChoice,
    Program,
    Recv,
    Select,
    Send,
    free_names,
    substitute,
)
from probsess.typeops import dual, unfold


class RuntimeTypeError(RuntimeError):
    """The typed interpreter could not keep contexts consistent."""


@dataclass(frozen=True)
class Leaf:
    procs: tuple
    ctxs: tuple | None = None
    steps: int = 0


@dataclass(frozen=True)
class Node:
    p: Fraction
    left: Leaf | Node
    right: Leaf | Node


@dataclass(frozen=True)
class RunState:
    program: Program
    restrictions: frozenset[str]
    dist: Leaf | Node
    measured: tuple[str, ...] = ()
    used: frozenset[str] = frozenset()
    context: Mapping[str, Fraction] | None = None

    @property
    def typed(self) -> bool:
        return self.context is not None

    def leaves(self) -> Iterator[tuple[Fraction, Leaf]]:
        """Leaves with their weights."""
        stack = [(Fraction(1), self.dist)]
        while stack:
            w, d = stack.pop()
            if isinstance(d, Leaf):
                yield w, d
            else:
                stack.append((w * (1 - d.p), d.right))
                stack.append((w * d.p, d.left))


@dataclass(frozen=True)
class TraceRecord:
    round: int
    terminated: Fraction
    success: Fraction

    def line(self) -> str:
        t, s = self.terminated, self.success
        return f"{self.round} {t.numerator}/{t.denominator} {s.numerator}/{s.denominator}"


@dataclass
class RunTrace:
    session: str
    records: list[TraceRecord] = field(default_factory=list)

    def lines(self) -> str:
        return "\n".join(r.line() for r in self.records)


class _Names:
    def __init__(self, used):
        self.used = set(used)

    def claim(self, name: str) -> str:
        """``name`` itself if unused, otherwise a fresh variant of it."""
        if name not in self.used:
            self.used.add(name)
            return name
        base = name.rsplit("_", 1)[0] if name.rsplit("_", 1)[-1].isdigit() else name
        k = 1
        while f"{base}_{k}" in self.used:
            k += 1
        self.used.add(f"{base}_{k}")
        return f"{base}_{k}"


def _rename_bound(p, names: _Names, mapping: dict[str, str] | None = None):
    """Give every binder of ``p`` a name not used anywhere else in the run."""
    mapping = mapping or {}

    def n(x):
        return mapping.get(x, x)

    match p:
        case Recv(x, y, c):
            y2 = names.claim(y)
            return Recv(n(x), y2, _rename_bound(c, names, {**mapping, y: y2}))
        case New(x, c):
            x2 = names.claim(x)
            return New(x2, _rename_bound(c, names, {**mapping, x: x2}))
        case Send(x, m, c):
            return Send(n(x), n(m) if isinstance(m, str) else m, _rename_bound(c, names, mapping))
        case Select(x, lab, c):
            return Select(n(x), lab, _rename_bound(c, names, mapping))
        case Case(x, l, r):
            return Case(n(x), _rename_bound(l, names, mapping), _rename_bound(r, names, mapping))
        case Par(l, x, t, r):
            return Par(_rename_bound(l, names, mapping), n(x), t, _rename_bound(r, names, mapping))
        case PChoice(q, l, r):
            return PChoice(q, _rename_bound(l, names, mapping), _rename_bound(r, names, mapping))
        case Done(x):
            return Done(n(x))
        case Call(a, args):
            return Call(a, tuple(n(x) if isinstance(x, str) else x for x in args))
    return p


def _head_channel(p) -> str | None:
    if isinstance(p, (Recv, Send, Case, Select)):
        return p.chan
    return None


def is_terminated(leaf: Leaf | tuple) -> bool:
    procs = leaf.procs if isinstance(leaf, Leaf) else leaf
    return all(isinstance(p, (Idle, Done)) for p in procs)


def find_redex(procs) -> tuple[int, int] | None:
    """Indices ``(active, passive)`` of the redex on the least channel name.

    ``active`` is the sender or selector, ``passive`` the receiver or case.
    """
    by_chan: dict[str, list[int]] = {}
    for i, p in enumerate(procs):
        x = _head_channel(p)
        if x is not None:
            by_chan.setdefault(x, []).append(i)
    for x in sorted(by_chan):
        idx = by_chan[x]
        for i in idx:
            for j in idx:
                if isinstance(procs[i], Send) and isinstance(procs[j], Recv):
                    return i, j
                if isinstance(procs[i], Select) and isinstance(procs[j], Case):
                    return i, j
    return None


def can_step(leaf: Leaf) -> bool:
    return any(isinstance(p, Call) for p in leaf.procs) or find_redex(leaf.procs) is not None


class _Machine:
    """One round of work over a state; holds the per-round mutable bookkeeping."""

    def __init__(self, state: RunState, resolve: Callable[[Fraction], bool] | None = None):
        self.program = state.program
        self.names = _Names(state.used)
        self.restrictions = set(state.restrictions)
        self.typed = state.typed
        self.resolve = resolve
        self.checker = Checker(state.program) if self.typed else None

    # -- normal forms --------------------------------------------------
    def flatten(self, items):
        out = []
        stack = list(reversed(items))
        while stack:
            proc, ctx = stack.pop()
            match proc:
                case Par(l, x, t, r):
                    if ctx is None:
                        lctx = rctx = None
                    else:
                        fr = free_names(r)
                        lctx, rctx = {}, {}
                        for name, ty in ctx.items():
                            if name != x:
                                (rctx if name in fr else lctx)[name] = ty
                        lctx[x] = t
                        rctx[x] = dual(t)
                    stack.append((r, rctx))
                    stack.append((l, lctx))
                case New(x, body):
                    self.names.used.add(x)
                    self.restrictions.add(x)
                    stack.append((body, ctx))
                case PChoice(p, l, r) if p == 1:
                    stack.append((l, ctx))
                case PChoice(p, l, r) if p == 0:
                    stack.append((r, ctx))
                case PChoice(p, l, r) if self.resolve is not None:
                    stack.append((l if self.resolve(p) else r, ctx))
                case _:
                    out.append((proc, ctx))
        return out

    def expose(self, items, steps: int) -> Leaf | Node:
        items = self.flatten(items)
        for c, (proc, _) in enumerate(items):
            if isinstance(proc, PChoice):
                break
        else:
            procs = tuple(p for p, _ in items)
            ctxs = tuple(c for _, c in items) if self.typed else None
            return Leaf(procs, ctxs, steps)
        ch = items[c][0]
        if self.typed:
            left_ctxs, right_ctxs = self.split_typed(items, c)
        else:
            left_ctxs = right_ctxs = [None] * len(items)
        left = [(p, k) for (p, _), k in zip(items, left_ctxs)]
        right = [(p, k) for (p, _), k in zip(items, right_ctxs)]
        left[c] = (ch.left, left_ctxs[c])
        right[c] = (ch.right, right_ctxs[c])
        return Node(ch.p, self.expose(left, steps), self.expose(right, steps))

    # -- typed choice splitting ----------------------------------------
    def _solve(self, p, ctx, proc1, proc2, fixed1, fixed2):
        acc = ConstraintSystem()
        c1, c2 = {}, {}
        for name, t in ctx.items():
            if name in fixed1:
                c1[name], c2[name] = fixed1[name], fixed2[name]
                continue
            h = unfold(t, self.program.types)
            if isinstance(h, (Choice, Completed)):
                v1, v2 = acc.fresh(), acc.fresh()
                acc.equate(v1.scale(p) + v2.scale(1 - p), Lin.of(h.p))
                c1[name] = replace(h, p=v1)
                c2[name] = replace(h, p=v2)
            else:
                c1[name] = c2[name] = t
        self.checker.check(dict(c1), proc1, acc)
        self.checker.check(dict(c2), proc2, acc)
        try:
            sol = acc.solve()
        except Infeasible:
            raise RuntimeTypeError("no consistent split of a context") from None

        def concrete(ctx):
            out = {}
            for name, t in ctx.items():
                if isinstance(t, (Choice, Completed)) and isinstance(t.p, Lin):
                    t = replace(t, p=t.p.evaluate(sol))
                out[name] = t
            return out

        return concrete(c1), concrete(c2)

    def split_typed(self, items, c):
        procs = [p for p, _ in items]
        ctxs = [k for _, k in items]
        chooser = procs[c]
        fns = [free_names(p) for p in procs]
        left, right = list(ctxs), list(ctxs)
        left[c], right[c] = self._solve(chooser.p, ctxs[c], chooser.left, chooser.right, {}, {})
        solved = {c}
        queue = deque([c])
        table = self.program.types
        while queue:
            s = queue.popleft()
            for d in range(len(procs)):
                if d in solved or not (fns[s] & fns[d]):
                    continue
                fixed1, fixed2, changed = {}, {}, False
                for name in fns[s] & fns[d]:
                    old = unfold(ctxs[d][name], table)
                    n1 = unfold(left[s][name], table)
                    n2 = unfold(right[s][name], table)
                    if isinstance(old, (Branch, Choice)) and isinstance(n1, (Branch, Choice)):
                        fixed1[name] = replace(old, p=n1.p)
                        fixed2[name] = replace(old, p=n2.p)
                        changed |= n1.p != old.p or n2.p != old.p
                solved.add(d)
                if changed:
                    left[d], right[d] = self._solve(
                        chooser.p, ctxs[d], procs[d], procs[d], fixed1, fixed2
                    )
                    queue.append(d)
        return left, right

    # -- reduction -----------------------------------------------------
    def expand_calls(self, items):
        out, changed = [], False
        for proc, ctx in items:
            if isinstance(proc, Call):
                d = self.program.defs[proc.name]
                body = _rename_bound(d.body, self.names)
                proc = substitute(body, {x: a for (x, _), a in zip(d.params, proc.args)})
                changed = True
            out.append((proc, ctx))
        return out, changed

    def fire(self, items):
        procs = [p for p, _ in items]
        redex = find_redex(procs)
        if redex is None:
            return items, False
        i, j = redex
        a, b = procs[i], procs[j]
        ca, cb = items[i][1], items[j][1]
        table = self.program.types
        if isinstance(a, Send):
            new_b = substitute(b.cont, {b.binder: a.msg})
            if ca is not None:
                ta, tb = unfold(ca[a.chan], table), unfold(cb[b.chan], table)
                ca = {k: v for k, v in ca.items() if k != a.msg}
                ca[a.chan] = ta.cont
                cb = {**cb, b.chan: tb.cont}
                if isinstance(a.msg, str):
                    cb[a.msg] = items[i][1][a.msg]
            new_a = a.cont
        else:
            new_a = a.cont
            new_b = b.left if a.label == "left" else b.right
            if ca is not None:
                ta, tb = unfold(ca[a.chan], table), unfold(cb[b.chan], table)
                pick = (lambda t: t.left) if a.label == "left" else (lambda t: t.right)
                ca = {**ca, a.chan: pick(ta)}
                cb = {**cb, b.chan: pick(tb)}
        items = list(items)
        items[i] = (new_a, ca)
        items[j] = (new_b, cb)
        return items, True


def _items(leaf: Leaf):
    ctxs = leaf.ctxs if leaf.ctxs is not None else [None] * len(leaf.procs)
    return list(zip(leaf.procs, ctxs))


def _map_leaves(dist, fn):
    if isinstance(dist, Leaf):
        return fn(dist)
    return Node(dist.p, _map_leaves(dist.left, fn), _map_leaves(dist.right, fn))


def normalize(proc, program: Program, context: Mapping[str, Fraction] | None = None) -> RunState:
    """Exposed form of ``proc``: restrictions and choices above flat parallel lists.

    With ``context`` (the ``#p`` of each free name, as synthesized by the
    checker) the state is typed.
    """
    names = _Names(free_names(proc))
    proc = _rename_bound(proc, names)
    measured = tuple(sorted(free_names(proc)))
    base = RunState(program, frozenset(), Leaf(()), measured, frozenset(names.used),
                    dict(context) if context is not None else None)
    m = _Machine(base)
    ctx = {x: Completed(Fraction(p)) for x, p in context.items()} if context is not None else None
    dist = m.expose([(proc, ctx)], 0)
    return replace(base, dist=dist, restrictions=frozenset(m.restrictions), used=frozenset(m.names.used))


def _step_leaf(m: _Machine, leaf: Leaf):
    items, expanded = m.expand_calls(_items(leaf))
    dist = m.expose(items, leaf.steps) if expanded else leaf

    def fire(lf: Leaf):
        items, fired = m.fire(_items(lf))
        if not (fired or expanded):
            return lf
        return m.expose(items, lf.steps + 1)

    return _map_leaves(dist, fire)


def step_round(state: RunState) -> RunState:
    m = _Machine(state)
    dist = _map_leaves(state.dist, lambda leaf: _step_leaf(m, leaf))
    return replace(state, dist=dist, restrictions=frozenset(m.restrictions), used=frozenset(m.names.used))


def success_measure(state: RunState, x: str) -> Fraction:
    if x in state.restrictions:
        raise ValueError(f"{x} is restricted; only free sessions can be measured")

    def m(d) -> Fraction:
        if isinstance(d, Leaf):
            return Fraction(int(any(isinstance(p, Done) and p.chan == x for p in d.procs)))
        return d.p * m(d.left) + (1 - d.p) * m(d.right)

    return m(state.dist)


def terminated_weight(state: RunState) -> Fraction:
    return sum((w for w, leaf in state.leaves() if is_terminated(leaf)), Fraction(0))


def _record(state: RunState, k: int, x: str) -> TraceRecord:
    return TraceRecord(k, terminated_weight(state), success_measure(state, x))


def run_states(proc, program: Program, rounds: int, context=None) -> Iterator[RunState]:
    """The state after 0, 1, ..., ``rounds`` rounds."""
    state = normalize(proc, program, context)
    yield state
    for _ in range(rounds):
        state = step_round(state)
        yield state


def bounded_run(proc, program: Program, x: str, rounds: int) -> RunTrace:
    trace = RunTrace(x)
    for k, state in enumerate(run_states(proc, program, rounds)):
        trace.records.append(_record(state, k, x))
    return trace


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: Fraction
    successes: int
    samples: int


def _sample(proc, program: Program, x: str, max_steps: int, rng: random.Random) -> bool:
    """Run one execution where every choice is settled by a coin flip."""
    names = _Names(free_names(proc))
    proc = _rename_bound(proc, names)
    state = RunState(program, frozenset(), Leaf(()), used=frozenset(names.used))
    m = _Machine(state, resolve=lambda p: rng.random() < p)
    leaf = m.expose([(proc, None)], 0)
    for _ in range(max_steps):
        if any(isinstance(p, Done) and p.chan == x for p in leaf.procs):
            return True
        if is_terminated(leaf):
            return False
        nxt = _step_leaf(m, leaf)
        if nxt is leaf:
            return False
        leaf = nxt
    return any(isinstance(p, Done) and p.chan == x for p in leaf.procs)


def monte_carlo(proc, program: Program, x: str, samples: int, max_steps: int, seed: int) -> MonteCarloResult:
    """Estimate the success probability of ``x`` under sampled choices.

    Sample ``i`` draws from ``random.Random(f"{seed}-{i}")``, so results do
    not depend on how samples are scheduled.
    """
    hits = 0
    for i in range(samples):
        if _sample(proc, program, x, max_steps, random.Random(f"{seed}-{i}")):
            hits += 1
    return MonteCarloResult(Fraction(hits, samples) if samples else Fraction(0), hits, samples)


# ---------------------------------------------------------------------------
# Printing a typed state back as a process


def _leaf_process(state: RunState, leaf: Leaf, fresh: _Names):
    procs, ctxs = leaf.procs, leaf.ctxs
    fns = [free_names(p) for p in procs]
    holders: dict[str, list[int]] = {}
    for i, fn in enumerate(fns):
        for name in fn:
            holders.setdefault(name, []).append(i)
    for name, hs in holders.items():
        if len(hs) > 2:
            raise RuntimeTypeError(f"{name} is shared by more than two processes")
    edges = {name: hs for name, hs in holders.items() if len(hs) == 2}
    adj: dict[int, list[tuple[str, int]]] = {i: [] for i in range(len(procs))}
    for name, (a, b) in edges.items():
        adj[a].append((name, b))
        adj[b].append((name, a))

    def reach(start, banned):
        seen, stack = {start}, [start]
        while stack:
            for name, nb in adj[stack.pop()]:
                if name != banned and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return seen

    def build(group: set[int]):
        inner = sorted(n for n, (a, b) in edges.items() if a in group and b in group)
        if not inner:
            (only,) = group
            return procs[only]
        name = inner[0]
        a, b = edges[name]
        part_a = reach(a, name) & group
        part_b = group - part_a
        return Par(build(part_a), name, ctxs[a][name], build(part_b))

    groups, seen = [], set()
    for i in range(len(procs)):
        if i not in seen:
            g = reach(i, None)
            seen |= g
            groups.append(g)

    rendered = []
    for g in groups:
        p = build(g)
        for name in sorted(n for n, hs in holders.items() if len(hs) == 1 and hs[0] in g):
            p = Par(p, name, ctxs[holders[name][0]][name], Idle())
        rendered.append(p)
    if not rendered:
        rendered.append(Idle())
    out = rendered[0]
    for p in rendered[1:]:
        d = fresh.claim("d")
        out = New(d, Par(out, d, EndFail(), p))
    for name in state.measured:
        if name not in holders:
            out = Par(out, name, EndFail(), Idle())
    for name in sorted(free_names(out) & state.restrictions, reverse=True):
        out = New(name, out)
    return out


def render_state(state: RunState):
    """The whole distribution as one process (typed states only)."""
    if not state.typed:
        raise ValueError("only typed run states can be printed back as processes")
    fresh = _Names(state.used)

    def go(d):
        if isinstance(d, Leaf):
            return _leaf_process(state, d, fresh)
        return PChoice(d.p, go(d.left), go(d.right))

    return go(state.dist)


__all__ = [
    "Leaf",
    "MonteCarloResult",
    "Node",
    "RunState",
    "RunTrace",
    "TraceRecord",
    "bounded_run",
    "can_step",
    "find_redex",
    "is_terminated",
    "monte_carlo",
    "normalize",
    "render_state",
    "run_states",
    "step_round",
    "success_measure",
    "terminated_weight",
]
