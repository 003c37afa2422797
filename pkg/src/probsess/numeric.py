"""Exact rational linear algebra.

Everything here works on :class:`fractions.Fraction`; no floating point is
ever involved. Three entry points matter to the rest of the package:

* :func:`solve_unique` solves a determined system of linear equations,
* :func:`feasible` finds a point satisfying equalities plus box bounds,
* :func:`invert` inverts a square matrix by Gauss-Jordan elimination.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational as _RationalABC

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class NumericError(ArithmeticError):
    pass


class NoUniqueSolution(NumericError):
    """The equations are inconsistent or leave some variable undetermined."""


class Infeasible(NumericError):
    pass


class SingularMatrix(NumericError):
    pass


def to_rational(value: str | int | Fraction) -> Fraction:
    """Exact conversion; decimal strings keep their exact value ("0.25" -> 1/4)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, _RationalABC)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def probability(value: str | int | Fraction) -> Fraction:
    p = to_rational(value)
    if not 0 <= p <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    return p


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class LinearSystem:
    """Equations ``row . x = constant`` over named unknowns, plus optional bounds.

    Rows are dense: one coefficient per entry of ``variables``.
    """

    variables: tuple[str, ...]
    equations: tuple[tuple[tuple[Fraction, ...], Fraction], ...] = ()
    bounds: Mapping[str, tuple[Fraction, Fraction]] | None = field(default=None)

    def __post_init__(self) -> None:
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variable names")
        for row, _ in self.equations:
            if len(row) != n:
                raise ValueError(f"equation row has {len(row)} entries, expected {n}")
        if self.bounds is not None:
            unknown = set(self.bounds) - set(self.variables)
            if unknown:
                raise ValueError(f"bounds for unknown variables {sorted(unknown)}")

    @classmethod
    def from_sparse(
        cls,
        variables: Sequence[str],
        equations: Iterable[tuple[Mapping[str, Fraction], Fraction]],
        bounds: Mapping[str, tuple[Fraction, Fraction]] | None = None,
    ) -> LinearSystem:
        index = {v: i for i, v in enumerate(variables)}
        dense = []
        for coeffs, const in equations:
            row = [ZERO] * len(variables)
            for v, c in coeffs.items():
                row[index[v]] += to_rational(c)
            dense.append((tuple(row), to_rational(const)))
        return cls(tuple(variables), tuple(dense), dict(bounds) if bounds is not None else None)

    def sparse_rows(self) -> list[tuple[dict[int, Fraction], Fraction]]:
        return [
            ({i: c for i, c in enumerate(row) if c != 0}, const)
            for row, const in self.equations
        ]

    def satisfied_by(self, assignment: Mapping[str, Fraction]) -> bool:
        values = [assignment[v] for v in self.variables]
        for row, const in self.equations:
            if sum((c * x for c, x in zip(row, values)), ZERO) != const:
                return False
        for v, (lo, hi) in (self.bounds or {}).items():
            if not lo <= assignment[v] <= hi:
                return False
        return True


def _reduce(rows: Iterable[tuple[dict[int, Fraction], Fraction]]):
    """Incremental reduced row echelon form over sparse rows.

    Returns ``pivots`` mapping a pivot column to ``(coeffs, const)`` with
    ``x_pivot + sum(coeffs[j] * x_j) = const`` where every ``j`` is a
    non-pivot column. Raises :class:`NoUniqueSolution` on ``0 = c`` with
    ``c != 0`` (callers translate it as appropriate).
    """
    pivots: dict[int, tuple[dict[int, Fraction], Fraction]] = {}
    for coeffs, const in rows:
        row = dict(coeffs)
        c = const
        for col in [k for k in row if k in pivots]:
            factor = row.pop(col)
            prow, pconst = pivots[col]
            for j, a in prow.items():
                v = row.get(j, ZERO) - factor * a
                if v:
                    row[j] = v
                else:
                    row.pop(j, None)
            c -= factor * pconst
        if not row:
            if c != 0:
                raise _Inconsistent
            continue
        col = min(row)
        lead = row.pop(col)
        row = {j: a / lead for j, a in row.items()}
        c = c / lead
        for pcol, (prow, pconst) in list(pivots.items()):
            factor = prow.get(col)
            if factor is None:
                continue
            del prow[col]
            for j, a in row.items():
                v = prow.get(j, ZERO) - factor * a
                if v:
                    prow[j] = v
                else:
                    prow.pop(j, None)
            pivots[pcol] = (prow, pconst - factor * c)
        pivots[col] = (row, c)
    return pivots


class _Inconsistent(Exception):
    pass


def solve_unique(system: LinearSystem) -> dict[str, Fraction]:
    if system.bounds:
        raise ValueError("solve_unique takes a system without bounds")
    try:
        pivots = _reduce(system.sparse_rows())
    except _Inconsistent:
        raise NoUniqueSolution("inconsistent equations") from None
    n = len(system.variables)
    if len(pivots) < n:
        free = [system.variables[i] for i in range(n) if i not in pivots]
        raise NoUniqueSolution(f"undetermined variables: {', '.join(free)}")
    return {system.variables[col]: const for col, (_, const) in pivots.items()}


# An inequality ``sum(coeffs[j] * x_j) <= bound`` over free-column indices.
_Ineq = tuple[dict[int, Fraction], Fraction]


def _normalise(ineq: _Ineq) -> tuple[tuple[tuple[int, Fraction], ...], Fraction]:
    coeffs, bound = ineq
    if not coeffs:
        return (), bound
    scale = max(abs(a) for a in coeffs.values())
    return tuple(sorted((j, a / scale) for j, a in coeffs.items())), bound / scale


def _dedupe(ineqs: Iterable[_Ineq]) -> list[_Ineq]:
    best: dict[tuple, Fraction] = {}
    for ineq in ineqs:
        key, bound = _normalise(ineq)
        if key not in best or bound < best[key]:
            best[key] = bound
    return [(dict(key), bound) for key, bound in best.items()]


def _eliminate(ineqs: list[_Ineq], var: int) -> list[_Ineq]:
    upper, lower, rest = [], [], []
    for coeffs, bound in ineqs:
        a = coeffs.get(var, ZERO)
        if a > 0:
            upper.append((coeffs, bound))
        elif a < 0:
            lower.append((coeffs, bound))
        else:
            rest.append((coeffs, bound))
    for uc, ub in upper:
        ua = uc[var]
        for lc, lb in lower:
            la = -lc[var]
            combined: dict[int, Fraction] = {}
            for j in set(uc) | set(lc):
                if j == var:
                    continue
                v = la * uc.get(j, ZERO) + ua * lc.get(j, ZERO)
                if v:
                    combined[j] = v
            rest.append((combined, la * ub + ua * lb))
    return _dedupe(rest)


def _interval(ineqs: list[_Ineq], var: int, values: Mapping[int, Fraction]):
    lo: Fraction | None = None
    hi: Fraction | None = None
    for coeffs, bound in ineqs:
        a = ZERO
        rhs = bound
        for j, c in coeffs.items():
            if j == var:
                a = c
            else:
                rhs -= c * values[j]
        if a > 0:
            cand = rhs / a
            hi = cand if hi is None or cand < hi else hi
        elif a < 0:
            cand = rhs / a
            lo = cand if lo is None or cand > lo else lo
        elif rhs < 0:
            raise Infeasible("contradictory bounds")
    if lo is not None and hi is not None and lo > hi:
        raise Infeasible("empty interval")
    return lo, hi


def feasible(system: LinearSystem) -> dict[str, Fraction]:
    """Exact feasibility for equalities plus box bounds.

    Equalities are eliminated by Gaussian elimination; the remaining free
    unknowns go through Fourier-Motzkin elimination and are then fixed one
    at a time at the midpoint of their admissible interval, so the answer is
    deterministic.
    """
    n = len(system.variables)
    bounds = system.bounds or {}
    missing = [v for v in system.variables if v not in bounds]
    if missing:
        raise ValueError(f"feasible needs bounds on every variable; missing {missing}")
    try:
        pivots = _reduce(system.sparse_rows())
    except _Inconsistent:
        raise Infeasible("inconsistent equations") from None

    free = [i for i in range(n) if i not in pivots]
    ineqs: list[_Ineq] = []
    for i in free:
        lo, hi = bounds[system.variables[i]]
        ineqs.append(({i: ONE}, hi))
        ineqs.append(({i: -ONE}, -lo))
    for col, (coeffs, const) in pivots.items():
        lo, hi = bounds[system.variables[col]]
        # x_col = const - sum(coeffs * x_free)
        ineqs.append(({j: -a for j, a in coeffs.items()}, hi - const))
        ineqs.append((dict(coeffs), const - lo))
    ineqs = _dedupe(ineqs)

    stages = [ineqs]
    for var in reversed(free):
        stages.append(_eliminate(stages[-1], var))
    for coeffs, bound in stages[-1]:
        if not coeffs and bound < 0:
            raise Infeasible("bounds cannot be met")

    values: dict[int, Fraction] = {}
    for k, var in enumerate(free):
        stage = stages[len(free) - 1 - k]
        lo, hi = _interval(stage, var, values)
        if lo is None and hi is None:
            values[var] = ZERO
        elif lo is None:
            values[var] = hi
        elif hi is None:
            values[var] = lo
        else:
            values[var] = (lo + hi) / 2
    for col, (coeffs, const) in pivots.items():
        values[col] = const - sum((a * values[j] for j, a in coeffs.items()), ZERO)
    result = {system.variables[i]: values[i] for i in range(n)}
    for v, (lo, hi) in bounds.items():
        if not lo <= result[v] <= hi:
            raise Infeasible(f"bound on {v} violated")
    return result


def identity(n: int) -> list[list[Fraction]]:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def matmul(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    if a and len(a[0]) != len(b):
        raise ValueError("shape mismatch")
    cols = len(b[0]) if b else 0
    return [
        [sum((row[k] * b[k][j] for k in range(len(b))), ZERO) for j in range(cols)]
        for row in a
    ]


def invert(matrix: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise ValueError("invert needs a square matrix")
    work = [[to_rational(x) for x in row] + e for row, e in zip(matrix, identity(n))]
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            raise SingularMatrix(f"no pivot in column {col}")
        work[col], work[pivot] = work[pivot], work[col]
        lead = work[col][col]
        work[col] = [x / lead for x in work[col]]
        for r in range(n):
            if r != col and work[r][col] != 0:
                f = work[r][col]
                work[r] = [x - f * y for x, y in zip(work[r], work[col])]
    return [row[n:] for row in work]
