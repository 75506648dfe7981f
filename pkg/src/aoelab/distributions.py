"""Probability tables over labelled +/-1 outcome tuples."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
SIGNS = (1, -1)

# Null (no event) is stored as None in distribution cells and 0 in sample arrays.
NULL = None


class DistributionError(ValueError):
    pass


def outcome_cells(n: int) -> list[tuple[int, ...]]:
    """All +/-1 tuples of length n, +1 first (lexicographic)."""
    return list(itertools.product(SIGNS, repeat=n))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    variables: tuple[str, ...]
    probs: Mapping[tuple, float]

    def __post_init__(self):
        variables = tuple(self.variables)
        if len(set(variables)) != len(variables):
            raise DistributionError(f"duplicate variables {variables}")
        probs = {}
        for cell, p in self.probs.items():
            cell = tuple(cell)
            if len(cell) != len(variables):
                raise DistributionError(f"cell {cell} does not match variables {variables}")
            if any(v not in (1, -1, None) for v in cell):
                raise DistributionError(f"cell {cell} has values outside {{+1, -1, Null}}")
            p = float(p)
            if p < -PROB_TOL or not math.isfinite(p):
                raise DistributionError(f"negative probability {p} at {cell}")
            probs[cell] = probs.get(cell, 0.0) + p
        total = sum(probs.values())
        if abs(total - 1.0) > PROB_TOL * max(1, len(probs)):
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, cell) -> float:
        return self.probs.get(tuple(cell), 0.0)

    def cells(self) -> list[tuple]:
        """Canonically ordered cells: the full +/-1 grid, then any Null-bearing cells."""
        grid = outcome_cells(len(self.variables))
        extra = sorted((c for c in self.probs if c not in set(grid)), key=_null_sort_key)
        return grid + extra

    def marginal(self, variables: Sequence[str]) -> "JointDistribution":
        variables = tuple(variables)
        idx = [self._index(v) for v in variables]
        out: dict[tuple, float] = {}
        for cell, p in self.probs.items():
            key = tuple(cell[i] for i in idx)
            out[key] = out.get(key, 0.0) + p
        return JointDistribution(variables, out)

    def rename(self, mapping: Mapping[str, str]) -> "JointDistribution":
        return JointDistribution(tuple(mapping.get(v, v) for v in self.variables), self.probs)

    def expectation_of_product(self, variables: Sequence[str] | None = None) -> float:
        """E[prod of the named +/-1 variables]; Null cells contribute zero."""
        variables = self.variables if variables is None else tuple(variables)
        idx = [self._index(v) for v in variables]
        total = 0.0
        for cell, p in self.probs.items():
            values = [cell[i] for i in idx]
            if None in values:
                continue
            total += p * math.prod(values)
        return total

    def correlator(self, x: str, y: str) -> float:
        return self.expectation_of_product((x, y))

    def mean(self, x: str) -> float:
        return self.expectation_of_product((x,))

    def vector(self, cells: Iterable[tuple] | None = None) -> np.ndarray:
        cells = self.cells() if cells is None else list(cells)
        return np.array([self[c] for c in cells])

    def total_variation(self, other: "JointDistribution") -> float:
        if other.variables != self.variables:
            other = other.marginal(self.variables)
        keys = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(self[k] - other[k]) for k in keys)

    def max_abs_difference(self, other: "JointDistribution") -> float:
        if other.variables != self.variables:
            other = other.marginal(self.variables)
        keys = set(self.probs) | set(other.probs)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def support(self, threshold: float) -> frozenset:
        return frozenset(c for c, p in self.probs.items() if p > threshold)

    def is_product(self, tol: float = 1e-9) -> bool:
        singles = [self.marginal((v,)) for v in self.variables]
        for cell in self.cells():
            expected = math.prod(s[(cell[i],)] for i, s in enumerate(singles))
            if abs(self[cell] - expected) > tol:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "cells": [
                {"outcome": [_cell_token(v) for v in cell], "p": self[cell]}
                for cell in self.cells()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "JointDistribution":
        cells = {tuple(_parse_token(v) for v in row["outcome"]): row["p"] for row in data["cells"]}
        return cls(tuple(data["variables"]), cells)

    def _index(self, v: str) -> int:
        try:
            return self.variables.index(v)
        except ValueError:
            raise DistributionError(f"variable {v!r} not in {self.variables}") from None

    def __repr__(self):
        body = ", ".join(f"{cell}: {self[cell]:.6g}" for cell in self.cells())
        return f"JointDistribution({self.variables}, {{{body}}})"


def pair_distribution(x: str, y: str, mean_x: float, mean_y: float, corr: float) -> JointDistribution:
    """Two-variable table from its means and correlator."""
    cells = {
        (a, b): (1 + a * mean_x + b * mean_y + a * b * corr) / 4
        for a, b in outcome_cells(2)
    }
    return JointDistribution((x, y), cells)


def product(*dists: JointDistribution) -> JointDistribution:
    variables: tuple[str, ...] = ()
    cells: dict[tuple, float] = {(): 1.0}
    for d in dists:
        variables += d.variables
        cells = {a + b: pa * pb for a, pa in cells.items() for b, pb in d.probs.items()}
    return JointDistribution(variables, cells)


def _null_sort_key(cell):
    return tuple(2 if v is None else (0 if v == 1 else 1) for v in cell)


def _cell_token(v):
    return "null" if v is None else int(v)


def _parse_token(v):
    return None if v in ("null", None) else int(v)
