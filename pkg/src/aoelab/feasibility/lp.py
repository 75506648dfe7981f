"""Joint-distribution feasibility for the four pairs AB, AD, CB, CD."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from aoelab.distributions import JointDistribution, outcome_cells
from aoelab.feasibility.simplex import phase_one

PAIRS = ("AB", "AD", "CB", "CD")
VARIABLES = ("A", "B", "C", "D")
VERTICES = tuple(itertools.product((1, -1), repeat=4))  # (A, B, C, D)
CELLS = tuple(outcome_cells(2))
DENOMINATOR = 10**6
MARGINAL_TOL = 1e-9

# odd number of minus signs over (AB, AD, CB, CD)
CHSH_SIGNS = tuple(s for s in itertools.product((1, -1), repeat=4) if s.count(-1) % 2 == 1)


class FeasibilityInputError(ValueError):
    pass


class MarginalMismatchError(FeasibilityInputError):
    """Single-variable marginals differ between pairs: a signalling input, not an infeasible one."""


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


@dataclass(frozen=True)
class RationalTargets:
    means: dict[str, Fraction]
    correlators: dict[str, Fraction]
    cells: dict[str, dict[tuple[int, int], Fraction]]
    rounding_error: float

    def chsh(self, signs) -> Fraction:
        return sum((s * self.correlators[p] for s, p in zip(signs, PAIRS)), Fraction(0))


@dataclass(frozen=True)
class FarkasCertificate:
    """Linear functional on the 16 target cells.

    Every context-independent joint gives a value <= ``bound``; the targets give ``value``.
    """

    coefficients: dict[str, dict[tuple[int, int], Fraction]]
    bound: Fraction
    value: Fraction

    @property
    def violation(self) -> Fraction:
        return self.value - self.bound

    def evaluate(self, cells: Mapping[str, Mapping[tuple[int, int], Fraction]]) -> Fraction:
        return sum(
            (self.coefficients[p][c] * Fraction(cells[p][c]) for p in PAIRS for c in CELLS),
            Fraction(0),
        )

    def correlator_weights(self) -> dict[str, Fraction]:
        return {p: sum((x * y * self.coefficients[p][(x, y)] for x, y in CELLS), Fraction(0)) / 4 for p in PAIRS}

    def chsh_signs(self) -> tuple[int, int, int, int] | None:
        """Sign pattern if the correlator part is a multiple of a CHSH expression, else None."""
        w = [self.correlator_weights()[p] for p in PAIRS]
        if w[0] == 0 or any(abs(x) != abs(w[0]) for x in w):
            return None
        signs = tuple(1 if x > 0 else -1 for x in w)
        return signs if signs.count(-1) % 2 == 1 else None

    def to_dict(self) -> dict:
        return {
            "kind": "farkas",
            "coefficients": {
                p: {f"{x:+d},{y:+d}": fraction_str(self.coefficients[p][(x, y)]) for x, y in CELLS}
                for p in PAIRS
            },
            "bound": fraction_str(self.bound),
            "value": fraction_str(self.value),
            "chsh_signs": list(self.chsh_signs()) if self.chsh_signs() else None,
        }


@dataclass(frozen=True)
class ChshInequality:
    """sum_P signs[P] * E(P) <= 2 for every context-independent joint."""

    signs: tuple[int, int, int, int]
    bound: Fraction
    value: Fraction

    @property
    def violation(self) -> Fraction:
        return self.value - self.bound

    def to_dict(self) -> dict:
        return {
            "kind": "chsh",
            "coefficients": {p: f"{s}/1" for p, s in zip(PAIRS, self.signs)},
            "bound": fraction_str(self.bound),
            "value": fraction_str(self.value),
            "achieved_float": float(self.value),
        }


@dataclass(frozen=True)
class FeasibilityResult:
    verdict: str  # "Feasible" | "Infeasible"
    targets: RationalTargets
    witness: dict[tuple[int, ...], Fraction] | None = None
    certificate: FarkasCertificate | None = None
    chsh: ChshInequality | None = None
    pivots: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.verdict == "Feasible"

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "rounding": {"denominator": DENOMINATOR, "max_cell_error": self.targets.rounding_error},
            "pivots": self.pivots,
        }
        if self.witness is not None:
            out["witness"] = [
                {"A": v[0], "B": v[1], "C": v[2], "D": v[3], "p": fraction_str(w)}
                for v, w in self.witness.items() if w != 0
            ]
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        if self.chsh is not None:
            out["chsh_inequality"] = self.chsh.to_dict()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _round(x: float) -> Fraction:
    return Fraction(round(x * DENOMINATOR), DENOMINATOR)


def rationalize(targets: Mapping[str, JointDistribution]) -> RationalTargets:
    """Round means and correlators to denominator 10^6 and rebuild exact, consistent cells."""
    missing = set(PAIRS) - set(targets)
    if missing:
        raise FeasibilityInputError(f"missing pairwise targets {sorted(missing)}")
    tables = {}
    for p in PAIRS:
        d = targets[p]
        if len(d.variables) != 2:
            raise FeasibilityInputError(f"target {p} must be a two-variable distribution")
        if any(None in c for c in d.probs if d.probs[c] > 0):
            raise FeasibilityInputError(f"target {p} contains Null outcomes")
        tables[p] = {c: d[c] for c in CELLS}
    means_by_var: dict[str, list[float]] = {v: [] for v in VARIABLES}
    for p, table in tables.items():
        means_by_var[p[0]].append(sum(x * pr for (x, _), pr in table.items()))
        means_by_var[p[1]].append(sum(y * pr for (_, y), pr in table.items()))
    for v, vals in means_by_var.items():
        if max(vals) - min(vals) > MARGINAL_TOL:
            raise MarginalMismatchError(
                f"marginal of {v} differs between pairs ({vals}); the input signals"
            )
    means = {v: _round(sum(vals) / len(vals)) for v, vals in means_by_var.items()}
    corrs = {}
    cells = {}
    err = 0.0
    for p, table in tables.items():
        mx, my = means[p[0]], means[p[1]]
        e = _round(sum(x * y * pr for (x, y), pr in table.items()))
        # keep every rebuilt cell nonnegative; the shift is within rounding error
        lo = max(-(1 + x * mx + y * my) for x, y in CELLS if x * y == 1)
        hi = min(1 + x * mx + y * my for x, y in CELLS if x * y == -1)
        if lo > hi:
            raise FeasibilityInputError(f"target {p}: marginals admit no valid table")
        e = min(max(e, lo), hi)
        corrs[p] = e
        cells[p] = {(x, y): (1 + x * mx + y * my + x * y * e) / 4 for x, y in CELLS}
        err = max(err, max(abs(float(cells[p][c]) - table[c]) for c in CELLS))
    return RationalTargets(means, corrs, cells, err)


def _constraint_matrix():
    rows = []
    labels = []
    for p in PAIRS:
        i, j = VARIABLES.index(p[0]), VARIABLES.index(p[1])
        for x, y in CELLS:
            rows.append([Fraction(1 if (v[i], v[j]) == (x, y) else 0) for v in VERTICES])
            labels.append((p, (x, y)))
    return rows, labels


def marginals_of(witness: Mapping[tuple[int, ...], Fraction]) -> dict[str, dict[tuple[int, int], Fraction]]:
    out = {}
    for p in PAIRS:
        i, j = VARIABLES.index(p[0]), VARIABLES.index(p[1])
        table = {c: Fraction(0) for c in CELLS}
        for v, w in witness.items():
            table[(v[i], v[j])] += w
        out[p] = table
    return out


def vertex_value(coefficients, vertex) -> Fraction:
    total = Fraction(0)
    for p in PAIRS:
        i, j = VARIABLES.index(p[0]), VARIABLES.index(p[1])
        total += coefficients[p][(vertex[i], vertex[j])]
    return total


def chsh_classical_bound(signs) -> Fraction:
    """Maximum of the CHSH expression over the 16 deterministic assignments (exact)."""
    best = None
    for v in VERTICES:
        a, b, c, d = v
        val = Fraction(signs[0] * a * b + signs[1] * a * d + signs[2] * c * b + signs[3] * c * d)
        best = val if best is None else max(best, val)
    return best


def best_chsh(targets: RationalTargets) -> ChshInequality:
    # the odd patterns are closed under negation, so the max is the absolute value
    signs, value = max(((s, targets.chsh(s)) for s in CHSH_SIGNS), key=lambda sv: sv[1])
    return ChshInequality(tuple(signs), chsh_classical_bound(signs), value)


def joint_feasibility_lp(targets: Mapping[str, JointDistribution]) -> FeasibilityResult:
    """Does one distribution over (A, B, C, D) in {+1,-1}^4 reproduce all four pairs?"""
    rt = rationalize(targets)
    rows, labels = _constraint_matrix()
    b = [rt.cells[p][c] for p, c in labels]
    res = phase_one(rows, b)
    chsh = best_chsh(rt)
    if res.feasible:
        witness = {v: res.x[k] for k, v in enumerate(VERTICES)}
        if marginals_of(witness) != rt.cells:
            raise ArithmeticError("simplex witness does not reproduce the targets")
        return FeasibilityResult("Feasible", rt, witness=witness, chsh=chsh, pivots=res.pivots)
    coeffs = {p: {} for p in PAIRS}
    for (p, c), y in zip(labels, res.farkas):
        coeffs[p][c] = y
    bound = max(vertex_value(coeffs, v) for v in VERTICES)
    value = sum((coeffs[p][c] * rt.cells[p][c] for p, c in labels), Fraction(0))
    cert = FarkasCertificate(coeffs, bound, value)
    if not value > bound:
        raise ArithmeticError("Farkas certificate is not violated by the targets")
    notes = []
    if not chsh.value > chsh.bound:
        # Fine: infeasibility with consistent marginals implies a violated CHSH facet
        raise ArithmeticError("LP infeasible but no CHSH inequality is violated")
    notes.append("one supermeasurement per observer: feasibility reduces to the CHSH facets")
    return FeasibilityResult("Infeasible", rt, certificate=cert, chsh=chsh, pivots=res.pivots, notes=notes)
