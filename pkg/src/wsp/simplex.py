"""Dense two-phase tableau simplex for ``min c^T x  s.t.  A x = b, x >= 0``.

Runs either in exact rational arithmetic (``fractions.Fraction``) or in
floating point with a pivot tolerance. Bland's rule is used throughout, so
the method terminates on degenerate problems.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["LPResult", "simplex_standard_form"]


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: list | None
    objective: object | None
    basis: list[int]
    pivots: int


class _Tableau:
    """Rows ``0..m-1`` are constraints ``[coeffs | rhs]``; row ``m`` holds
    reduced costs with ``-objective`` in the rhs slot."""

    def __init__(self, rows, basis, exact: bool, tol: float):
        self.rows = rows
        self.basis = basis
        self.exact = exact
        self.tol = tol
        self.pivots = 0

    def is_neg(self, v) -> bool:
        return v < 0 if self.exact else v < -self.tol

    def is_pos(self, v) -> bool:
        return v > 0 if self.exact else v > self.tol

    def pivot(self, r: int, c: int) -> None:
        rows = self.rows
        pr = rows[r]
        p = pr[c]
        pr = [v / p for v in pr]
        rows[r] = pr
        for i, row in enumerate(rows):
            if i == r:
                continue
            f = row[c]
            if f != 0:
                rows[i] = [a - f * b for a, b in zip(row, pr)]
        self.basis[r] = c
        self.pivots += 1

    def run(self, allowed: int, max_pivots: int) -> str:
        """Bland's rule on the objective row; columns ``>= allowed`` never enter."""
        m = len(self.rows) - 1
        while True:
            obj = self.rows[m]
            enter = next((j for j in range(allowed) if self.is_neg(obj[j])), None)
            if enter is None:
                return "optimal"
            if self.pivots >= max_pivots:
                return "iteration_limit"
            leave = None
            best = None
            for i in range(m):
                a = self.rows[i][enter]
                if self.is_pos(a):
                    ratio = self.rows[i][-1] / a
                    if (
                        best is None
                        or ratio < best
                        or (ratio == best and self.basis[i] < self.basis[leave])
                    ):
                        best, leave = ratio, i
            if leave is None:
                return "unbounded"
            self.pivot(leave, enter)


def simplex_standard_form(
    c: Sequence,
    A: Sequence[Sequence],
    b: Sequence,
    *,
    exact: bool = True,
    tol: float = 1e-11,
    max_pivots: int = 10_000,
) -> LPResult:
    """Solve ``min c^T x`` over ``{x >= 0 : A x = b}``.

    With ``exact=True`` every input is converted to ``Fraction`` (floats
    convert without rounding) and the result is the exact optimum of the
    given data.
    """
    conv = Fraction if exact else float
    A = [[conv(v) for v in row] for row in A]
    b = [conv(v) for v in b]
    c = [conv(v) for v in c]
    m = len(A)
    n = len(c)
    zero = conv(0)
    one = conv(1)

    # phase 1: artificials on every row, rhs made nonnegative
    rows = []
    for i in range(m):
        row = list(A[i])
        rhs = b[i]
        if rhs < 0:
            row = [-v for v in row]
            rhs = -rhs
        art = [zero] * m
        art[i] = one
        rows.append(row + art + [rhs])
    obj = [zero] * (n + m + 1)
    for row in rows:
        for j in range(n):
            obj[j] -= row[j]
        obj[-1] -= row[-1]
    rows.append(obj)
    tab = _Tableau(rows, list(range(n, n + m)), exact, tol)
    status = tab.run(n, max_pivots)
    if status == "iteration_limit":
        return LPResult(status, None, None, tab.basis, tab.pivots)
    phase1 = -tab.rows[m][-1]
    scale = max([1.0] + [abs(float(v)) for v in b])
    if (exact and phase1 > 0) or (not exact and float(phase1) > tol * scale):
        return LPResult("infeasible", None, None, tab.basis, tab.pivots)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if tab.basis[i] >= n:
            col = next((j for j in range(n) if tab.is_pos(abs(tab.rows[i][j]))), None)
            if col is None:
                continue
            tab.pivot(i, col)
        keep.append(i)
    rows = [tab.rows[i][:n] + [tab.rows[i][-1]] for i in keep]
    basis = [tab.basis[i] for i in keep]

    # phase 2
    obj = list(c) + [zero]
    for i, j in enumerate(basis):
        f = obj[j]
        if f != 0:
            obj = [a - f * r for a, r in zip(obj, rows[i])]
    rows.append(obj)
    tab2 = _Tableau(rows, basis, exact, tol)
    tab2.pivots = tab.pivots
    status = tab2.run(n, max_pivots)
    x = [zero] * n
    for i, j in enumerate(tab2.basis):
        x[j] = tab2.rows[i][-1]
    if status != "optimal":
        return LPResult(status, x, None, tab2.basis, tab2.pivots)
    objective = -tab2.rows[len(tab2.basis)][-1]
    return LPResult("optimal", x, objective, tab2.basis, tab2.pivots)
