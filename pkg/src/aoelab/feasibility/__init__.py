"""Decision procedures for the existence of absolute joint assignments."""
from aoelab.feasibility.hardy import HARDY_MAXIMUM, HardyConfiguration, default_hardy_configuration, hardy_search
from aoelab.feasibility.lp import (
    FeasibilityResult,
    MarginalMismatchError,
    joint_feasibility_lp,
)
from aoelab.feasibility.parity import parity_assignment_search
from aoelab.feasibility.possibilistic import SupportTable, possibilistic_contradiction

__all__ = [
    "HARDY_MAXIMUM",
    "FeasibilityResult",
    "HardyConfiguration",
    "MarginalMismatchError",
    "SupportTable",
    "default_hardy_configuration",
    "hardy_search",
    "joint_feasibility_lp",
    "parity_assignment_search",
    "possibilistic_contradiction",
]
