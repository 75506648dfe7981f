"""Hardy-style support propagation over (A, B, C, D)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from aoelab.distributions import JointDistribution, outcome_cells

ZERO_THRESHOLD = 1e-9
SUPPORT_PAIRS = ("CD", "AD", "CB")
VARIABLES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class SupportTable:
    """Cells above the zero threshold, per pairwise distribution."""

    supports: dict[str, frozenset]
    threshold: float = ZERO_THRESHOLD

    def __post_init__(self):
        for pair, cells in self.supports.items():
            if not cells:
                raise ValueError(f"support of {pair} is empty")

    @classmethod
    def from_distributions(cls, dists: Mapping[str, JointDistribution], threshold: float = ZERO_THRESHOLD):
        return cls({p: frozenset(c for c in outcome_cells(2) if d[c] > threshold) for p, d in dists.items()},
                   threshold)

    @classmethod
    def full(cls, pairs=SUPPORT_PAIRS):
        return cls({p: frozenset(outcome_cells(2)) for p in pairs})

    def allows(self, pair: str, cell) -> bool:
        return tuple(cell) in self.supports[pair]


@dataclass(frozen=True)
class Completion:
    c: int
    d: int
    killed_by: str  # pair whose support lacks the required cell
    cell: tuple[int, int]


@dataclass(frozen=True)
class BlockedCell:
    a: int
    b: int
    target_probability: float
    completions: tuple[Completion, ...]


@dataclass(frozen=True)
class PossibilisticVerdict:
    contradiction: bool
    allowed_ab: frozenset
    blocked: tuple[BlockedCell, ...] = field(default_factory=tuple)

    @property
    def verdict(self) -> str:
        return "Contradiction" if self.contradiction else "NoContradiction"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "allowed_ab": sorted(list(c) for c in self.allowed_ab),
            "blocked": [
                {
                    "cell": {"A": blk.a, "B": blk.b},
                    "target_probability": blk.target_probability,
                    "trace": [
                        {"C": t.c, "D": t.d, "killed_by": t.killed_by, "missing_cell": list(t.cell)}
                        for t in blk.completions
                    ],
                }
                for blk in self.blocked
            ],
        }


def _pair_cell(pair, values):
    return (values[pair[0]], values[pair[1]])


def possibilistic_contradiction(supports: SupportTable, target: JointDistribution,
                                threshold: float = ZERO_THRESHOLD) -> PossibilisticVerdict:
    """Enumerate (a, b, c, d) allowed by the CD, AD and CB supports and project to AB.

    A contradiction is an AB cell the target gives probability above
    ``threshold`` that no allowed assignment reaches. For each blocked cell
    the trace lists, per (c, d) completion, the first support that kills it.
    """
    for pair in SUPPORT_PAIRS:
        if pair not in supports.supports:
            raise ValueError(f"missing support for {pair}")
    if len(target.variables) != 2:
        raise ValueError("target must be a distribution over (A, B)")
    allowed = set()
    for a, b, c, d in itertools.product((1, -1), repeat=4):
        values = {"A": a, "B": b, "C": c, "D": d}
        if all(supports.allows(p, _pair_cell(p, values)) for p in SUPPORT_PAIRS):
            allowed.add((a, b))
    blocked = []
    for a, b in outcome_cells(2):
        p_ab = target[(a, b)]
        if p_ab > threshold and (a, b) not in allowed:
            trace = []
            for c, d in outcome_cells(2):
                values = {"A": a, "B": b, "C": c, "D": d}
                killer = next(p for p in SUPPORT_PAIRS if not supports.allows(p, _pair_cell(p, values)))
                trace.append(Completion(c, d, killer, _pair_cell(killer, values)))
            blocked.append(BlockedCell(a, b, p_ab, tuple(trace)))
    return PossibilisticVerdict(bool(blocked), frozenset(allowed), tuple(blocked))
