"""Phase-I simplex in exact rational arithmetic (Bland's rule)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass
class PhaseOneResult:
    feasible: bool
    x: list[Fraction]
    # y with y.A_j <= 0 for every column and y.b > 0, when infeasible
    farkas: list[Fraction] | None
    infeasibility: Fraction
    pivots: int


def phase_one(A: Sequence[Sequence], b: Sequence, max_pivots: int = 10_000) -> PhaseOneResult:
    """Decide whether {x >= 0 : A x = b} is nonempty.

    Minimises the sum of one artificial variable per row. Bland's rule
    (lowest-index entering column, lowest-index leaving basic variable on
    ratio ties) guarantees termination.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    rows = []
    signs = []
    for i in range(m):
        if len(A[i]) != n:
            raise ValueError("ragged constraint matrix")
        sign = -1 if Fraction(b[i]) < 0 else 1
        signs.append(sign)
        row = [Fraction(sign * Fraction(a)) for a in A[i]]
        row += [Fraction(1 if k == i else 0) for k in range(m)]
        row.append(Fraction(sign * Fraction(b[i])))
        rows.append(row)
    basis = [n + i for i in range(m)]
    width = n + m
    cost = [Fraction(0)] * n + [Fraction(1)] * m
    # reduced costs r_j = c_j - c_B B^-1 A_j and objective w = c_B B^-1 b
    reduced = [cost[j] - sum(rows[i][j] for i in range(m)) for j in range(width)]
    objective = sum(rows[i][width] for i in range(m))

    pivots = 0
    while True:
        entering = next((j for j in range(width) if reduced[j] < 0), None)
        if entering is None:
            break
        leave = None
        best_ratio = None
        for i in range(m):
            a = rows[i][entering]
            if a > 0:
                ratio = rows[i][width] / a
                if (best_ratio is None or ratio < best_ratio
                        or (ratio == best_ratio and basis[i] < basis[leave])):
                    best_ratio, leave = ratio, i
        if leave is None:
            # phase-I objective is bounded below by zero; cannot happen
            raise ArithmeticError("unbounded phase-I problem")
        _pivot(rows, leave, entering)
        factor = reduced[entering]
        pivot_row = rows[leave]
        for j in range(width):
            reduced[j] -= factor * pivot_row[j]
        objective += factor * pivot_row[width]
        basis[leave] = entering
        pivots += 1
        if pivots > max_pivots:
            raise ArithmeticError("pivot limit exceeded")

    x = [Fraction(0)] * n
    for i, var in enumerate(basis):
        if var < n:
            x[var] = rows[i][width]
    if objective == 0:
        return PhaseOneResult(True, x, None, Fraction(0), pivots)
    # dual y' = c_B B^-1 read from the artificial columns: r_{n+i} = 1 - y'_i
    farkas = [signs[i] * (1 - reduced[n + i]) for i in range(m)]
    return PhaseOneResult(False, x, farkas, objective, pivots)


def _pivot(rows, r, c):
    pivot = rows[r][c]
    prow = [v / pivot for v in rows[r]]
    rows[r] = prow
    for i, row in enumerate(rows):
        if i != r and row[c] != 0:
            f = row[c]
            rows[i] = [v - f * pv for v, pv in zip(row, prow)]
