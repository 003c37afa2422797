"""Markov-chain view of session types and their success probability."""

from __future__ import annotations

from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction

from probsess.numeric import LinearSystem, identity, invert, matmul, solve_unique
from probsess.syntax import Branch, Choice, EndFail, EndSucc, In, Out, Ref, SessionType
from probsess.typeops import unfold


class WellFormednessError(ValueError):
    """Raised with the offending state and a reason of ``contractivity`` or ``reachability``."""

    def __init__(self, state: SessionType, reason: str, detail: str = ""):
        from probsess.printer import render_type

        self.state = state
        self.reason = reason
        msg = f"{reason} failure at state {render_type(state)}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class Dtmc:
    states: tuple[SessionType, ...]
    transitions: tuple[tuple[int, int, Fraction], ...]
    succ: int | None
    fail: int | None

    start = 0

    def successors(self, i: int) -> list[tuple[int, Fraction]]:
        return [(b, p) for a, b, p in self.transitions if a == i]

    def edge_list(self) -> str:
        return "\n".join(f"{a} {b} {p.numerator}/{p.denominator}" for a, b, p in self.transitions)


def _steps(head: SessionType) -> list[tuple[SessionType, Fraction]]:
    match head:
        case EndFail() | EndSucc():
            return [(head, Fraction(1))]
        case In(_, cont) | Out(_, cont):
            return [(cont, Fraction(1))]
        case Branch(p, left, right) | Choice(p, left, right):
            p = Fraction(p)
            return [(left, p), (right, 1 - p)]
    raise TypeError(f"not a session type head: {head!r}")


def _check_contractive(t: SessionType, table: Mapping[str, SessionType]) -> None:
    seen = set()
    start = t
    while isinstance(t, Ref):
        if t.name in seen:
            raise WellFormednessError(start, "contractivity", f"{t.name} unfolds to itself")
        if t.name not in table:
            raise WellFormednessError(start, "contractivity", f"unknown type name {t.name}")
        seen.add(t.name)
        t = table[t.name]


def state_space(t: SessionType, table: Mapping[str, SessionType]) -> Dtmc:
    """Breadth-first closure of ``t`` under one-step transitions.

    States reached only through probability-0 edges are still states;
    the zero edges themselves are not recorded.
    """
    _check_contractive(t, table)
    root = unfold(t, table)
    index = {root: 0}
    states = [root]
    transitions = []
    queue = deque([root])
    while queue:
        s = queue.popleft()
        merged: dict[int, Fraction] = {}
        for nxt, p in _steps(s):
            _check_contractive(nxt, table)
            h = unfold(nxt, table)
            if h not in index:
                index[h] = len(states)
                states.append(h)
                queue.append(h)
            merged[index[h]] = merged.get(index[h], Fraction(0)) + p
        i = index[s]
        transitions.extend((i, j, p) for j, p in merged.items() if p != 0)
    return Dtmc(
        tuple(states),
        tuple(transitions),
        index.get(EndSucc()),
        index.get(EndFail()),
    )


def check_wellformed(t: SessionType, table: Mapping[str, SessionType]) -> Dtmc:
    """Return the chain of ``t``; raise :class:`WellFormednessError` if ``t`` is ill-formed."""
    chain = state_space(t, table)
    preds: dict[int, list[int]] = {i: [] for i in range(len(chain.states))}
    for a, b, _ in chain.transitions:
        preds[b].append(a)
    leaves = [i for i in (chain.succ, chain.fail) if i is not None]
    good = set(leaves)
    queue = deque(leaves)
    while queue:
        for a in preds[queue.popleft()]:
            if a not in good:
                good.add(a)
                queue.append(a)
    for i, s in enumerate(chain.states):
        if i not in good:
            raise WellFormednessError(s, "reachability", "no end or done is reachable")
    return chain


def success_prob(t: SessionType, table: Mapping[str, SessionType]) -> Fraction:
    """Probability of absorption in ``done``, from one equation per state."""
    chain = check_wellformed(t, table)
    names = [f"s{i}" for i in range(len(chain.states))]
    rows = []
    for i, s in enumerate(chain.states):
        if i == chain.succ:
            rows.append(({names[i]: 1}, Fraction(1)))
        elif i == chain.fail:
            rows.append(({names[i]: 1}, Fraction(0)))
        else:
            coeffs = {names[i]: Fraction(1)}
            for j, p in chain.successors(i):
                coeffs[names[j]] = coeffs.get(names[j], Fraction(0)) - p
            rows.append((coeffs, Fraction(0)))
    return solve_unique(LinearSystem.from_sparse(names, rows))[names[chain.start]]


@dataclass(frozen=True)
class CanonicalForm:
    """Absorbing states first, then transient ones; ``B = (I - Q)^-1 R``."""

    absorbing: tuple[int, ...]
    transient: tuple[int, ...]
    q: list[list[Fraction]]
    r: list[list[Fraction]]
    fundamental: list[list[Fraction]]
    b: list[list[Fraction]]


def canonical_form(chain: Dtmc) -> CanonicalForm:
    absorbing = tuple(i for i in (chain.succ, chain.fail) if i is not None)
    transient = tuple(i for i in range(len(chain.states)) if i not in absorbing)
    t_pos = {s: k for k, s in enumerate(transient)}
    a_pos = {s: k for k, s in enumerate(absorbing)}
    q = [[Fraction(0)] * len(transient) for _ in transient]
    r = [[Fraction(0)] * len(absorbing) for _ in transient]
    for a, b, p in chain.transitions:
        if a in t_pos:
            if b in t_pos:
                q[t_pos[a]][t_pos[b]] += p
            else:
                r[t_pos[a]][a_pos[b]] += p
    n = len(transient)
    i_minus_q = [[e - x for e, x in zip(erow, qrow)] for erow, qrow in zip(identity(n), q)]
    fundamental = invert(i_minus_q) if n else []
    b = matmul(fundamental, r) if n else []
    return CanonicalForm(absorbing, transient, q, r, fundamental, b)


def success_prob_matrix(t: SessionType, table: Mapping[str, SessionType]) -> Fraction:
    """Same quantity as :func:`success_prob`, read off the absorption matrix."""
    chain = check_wellformed(t, table)
    if chain.start == chain.succ:
        return Fraction(1)
    if chain.start == chain.fail or chain.succ is None:
        return Fraction(0)
    form = canonical_form(chain)
    return form.b[form.transient.index(chain.start)][form.absorbing.index(chain.succ)]


__all__ = [
    "CanonicalForm",
    "Dtmc",
    "WellFormednessError",
    "canonical_form",
    "check_wellformed",
    "state_space",
    "success_prob",
    "success_prob_matrix",
]
