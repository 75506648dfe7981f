"""Exhaustive search for +/-1 assignments obeying the four GHZ parity constraints."""
from __future__ import annotations

import itertools
import math

# Positions in the assignment tuple (A1, A2, A3, B1, B2, B3)
ASSIGNMENT_VARIABLES = ("A1", "A2", "A3", "B1", "B2", "B3")
TRIOS = (
    ("B1", "B2", "B3"),
    ("B1", "A2", "A3"),
    ("A1", "B2", "A3"),
    ("A1", "A2", "B3"),
)


def parity_assignment_search(parities) -> list[tuple[int, ...]]:
    """All assignments to (A1, A2, A3, B1, B2, B3) whose trio products equal ``parities``.

    Scans the 64 assignments; the result is sorted canonically (+1 before -1).
    """
    parities = tuple(int(p) for p in parities)
    if len(parities) != 4 or any(p not in (1, -1) for p in parities):
        raise ValueError(f"need four parities in {{+1, -1}}, got {parities}")
    idx = [[ASSIGNMENT_VARIABLES.index(v) for v in trio] for trio in TRIOS]
    found = []
    for values in itertools.product((1, -1), repeat=6):
        if all(math.prod(values[i] for i in trio) == p for trio, p in zip(idx, parities)):
            found.append(values)
    return found
