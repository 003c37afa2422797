"""Shared fixtures-as-functions for the test modules."""

from __future__ import annotations

import dataclasses
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import probsess
from probsess.checker import check_closed, check_program
from probsess.parser import parse_program
from probsess.printer import render
from probsess.runtime import can_step, is_terminated, render_state, run_states, success_measure

PROGRAMS = Path(probsess.__file__).parent / "programs"


def load(name: str):
    return parse_program((PROGRAMS / f"{name}.ps").read_text())


def fmt(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def work_sharing_source(p: Fraction, q: Fraction) -> str:
    r = p / (p - p * q + q)
    return f"""
type S = +[{fmt(r)}]{{done; end}}
type T = !unit.+[{fmt(p - p * q + q)}]{{end; !S.!int.~T}}
def C(x: !int.~S) = x!7.case x {{ done x ; idle }}
def B(x: S, y: T, job: int) =
  y!().( x.left.y.left.done x
       +[{fmt(p)}] ( x.right.y.left.idle +[{fmt(q)}] y.right.y!x.y!job.A(y) ) )
def A(y: ~T) = y?(u).case y {{ idle ; y?(x).y?(z).B(x, y, z) }}
main = C(x) |[x: !int.~S]| (x?(z).B(x, y, z) |[y: T]| A(y))
"""


@dataclasses.dataclass
class RunCheck:
    programs: int = 0
    states: int = 0
    sr_failures: list = dataclasses.field(default_factory=list)
    df_failures: list = dataclasses.field(default_factory=list)
    bound_violations: list = dataclasses.field(default_factory=list)
    weight_errors: list = dataclasses.field(default_factory=list)
    monotone_errors: list = dataclasses.field(default_factory=list)
    exact_at_end: int = 0
    exact_failures: list = dataclasses.field(default_factory=list)


def check_runs(items, rounds: int = 10) -> RunCheck:
    """Run each ``(program, context)`` in typed mode and check every state."""
    out = RunCheck()
    for n, (prog, ctx) in enumerate(items):
        out.programs += 1
        prev = None
        for k, st in enumerate(run_states(prog.main, prog, rounds, ctx)):
            out.states += 1
            leaves = list(st.leaves())
            if sum(w for w, _ in leaves) != 1:
                out.weight_errors.append((n, k))
            for _, leaf in leaves:
                if not (is_terminated(leaf) or can_step(leaf)):
                    out.df_failures.append((n, k, leaf.procs))
            measures = {x: success_measure(st, x) for x in ctx}
            for x, value in measures.items():
                if value > ctx[x]:
                    out.bound_violations.append((n, k, x, value, ctx[x]))
            if prev is not None and any(measures[x] < prev[x] for x in ctx):
                out.monotone_errors.append((n, k))
            prev = measures
            if all(is_terminated(leaf) for _, leaf in leaves) and k == rounds:
                out.exact_at_end += 1
                if measures != ctx:
                    out.exact_failures.append((n, measures, ctx))
            text = render(dataclasses.replace(prog, main=render_state(st)))
            reparsed = parse_program(text)
            verdict = check_closed(reparsed, reparsed.main, ctx)
            if not verdict.ok:
                out.sr_failures.append((n, k, verdict.text(), text))
    return out


@lru_cache(maxsize=None)
def corpus_runs(n: int = 200, seed: int = 2024, rounds: int = 10) -> RunCheck:
    from generators import corpus

    return check_runs(corpus(n, seed), rounds)


def accepted_context(prog):
    report = check_program(prog)
    assert report.accepted, report.text()
    return report.main_context
