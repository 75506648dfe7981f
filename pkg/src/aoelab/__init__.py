"""Wigner's-friend laboratory: exact predictions, feasibility checks and model audits."""

__version__ = "0.1.0"
