"""Command-line front end.

Exit status: 0 on success, 1 when an analysis rejects its input, 2 for
usage errors, unreadable files and parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from decimal import Context, Decimal
from fractions import Fraction

from probsess.analysis import WellFormednessError, check_wellformed, success_prob, success_prob_matrix
from probsess.checker import check_program
from probsess.parser import ParseError, parse_program, parse_type
from probsess.printer import render_prob, render_type
from probsess.runtime import bounded_run, monte_carlo
from probsess.syntax import Ref, free_names

OK, REJECTED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def decimal(q: Fraction, digits: int = 20) -> str:
    ctx = Context(prec=digits)
    return str(ctx.divide(Decimal(q.numerator), Decimal(q.denominator)))


def _emit(args, record: dict, text: str) -> None:
    print(json.dumps(record, sort_keys=True) if args.json else text)


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    return parse_program(text)


def cmd_wf(args) -> int:
    prog = _load(args.file)
    status = OK
    for name in prog.types.user_names:
        try:
            check_wellformed(Ref(name), prog.types)
            _emit(args, {"type": name, "wellformed": True}, f"{name}: well-formed")
        except WellFormednessError as e:
            status = REJECTED
            _emit(
                args,
                {"type": name, "wellformed": False, "reason": e.reason, "state": render_type(e.state)},
                f"{name}: {e.reason} failure at {render_type(e.state)}",
            )
    return status


def cmd_check(args) -> int:
    report = check_program(_load(args.file))
    print(report.json_lines() if args.json else report.text())
    return OK if report.accepted else REJECTED


def _prob_line(args, label: str, t, table) -> int:
    try:
        a = success_prob(t, table)
        b = success_prob_matrix(t, table)
    except WellFormednessError as e:
        _emit(args, {"type": label, "error": str(e)}, f"{label}: {e}")
        return REJECTED
    record = {"type": label, "equations": render_prob(a), "matrix": render_prob(b),
              "decimal": decimal(a), "agree": a == b}
    text = f"{label}: {render_prob(a)} (≈{decimal(a)})"
    if a != b:
        text += f"\n  methods disagree: equations {render_prob(a)}, matrix {render_prob(b)}"
    else:
        text += "  [equations and matrix agree]"
    _emit(args, record, text)
    return OK if a == b else REJECTED


def cmd_prob(args) -> int:
    prog = _load(args.file)
    if args.type is not None:
        try:
            t = parse_type(args.type, prog.types)
        except ParseError as e:
            raise UsageError(f"--type: {e}") from None
        return _prob_line(args, args.type, t, prog.types)
    if prog.main is None:
        raise UsageError("prob needs --type or a main process")
    report = check_program(prog)
    main = report.main
    if not main.ok:
        print(main.text())
        return REJECTED
    for x, p in main.context.items():
        _emit(args, {"session": x, "probability": render_prob(p), "decimal": decimal(p)},
              f"{x}: {render_prob(p)} (≈{decimal(p)})")
    return OK


def _checked_main(args):
    prog = _load(args.file)
    if prog.main is None:
        raise UsageError("the program has no main process")
    if args.session not in free_names(prog.main):
        raise UsageError(f"session {args.session} is not free in main")
    main = check_program(prog).main
    return prog, main


def cmd_run(args) -> int:
    prog, main = _checked_main(args)
    if not main.ok:
        print(main.text())
        return REJECTED
    trace = bounded_run(prog.main, prog, args.session, args.rounds)
    p = main.context[args.session]
    for r in trace.records:
        _emit(args, {"round": r.round, "terminated": render_prob(r.terminated),
                     "success": render_prob(r.success)}, r.line())
    _emit(args, {"session": args.session, "type_level": render_prob(p)},
          f"type-level {args.session} : #[{render_prob(p)}]")
    return OK


def cmd_mc(args) -> int:
    prog, main = _checked_main(args)
    if not main.ok:
        print(main.text())
        return REJECTED
    res = monte_carlo(prog.main, prog, args.session, args.samples, args.max_steps, args.seed)
    _emit(
        args,
        {"session": args.session, "samples": res.samples, "successes": res.successes,
         "estimate": render_prob(res.estimate), "seed": args.seed,
         "type_level": render_prob(main.context[args.session])},
        f"estimate {float(res.estimate):.6f} ({res.successes}/{res.samples} successes, seed {args.seed});"
        f" type-level #[{render_prob(main.context[args.session])}]",
    )
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="probsess", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("file")
        p.add_argument("--json", action="store_true", help="one JSON record per line")
        p.set_defaults(fn=fn)
        return p

    command("wf", cmd_wf, "check well-formedness of every named type")
    command("check", cmd_check, "type-check definitions and main")
    p = command("prob", cmd_prob, "exact success probability")
    p.add_argument("--type", help="type name or type expression")
    p = command("run", cmd_run, "persistent-choice run with a per-round trace")
    p.add_argument("--session", required=True)
    p.add_argument("--rounds", type=int, default=20)
    p = command("mc", cmd_mc, "Monte-Carlo estimate of the success probability")
    p.add_argument("--session", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    for flag in ("rounds", "samples", "max_steps"):
        if getattr(args, flag, 0) < 0:
            print(f"probsess: --{flag.replace('_', '-')} must be non-negative", file=sys.stderr)
            return USAGE
    try:
        return args.fn(args)
    except (UsageError, ParseError) as e:
        print(f"probsess: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
