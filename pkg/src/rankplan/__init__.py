"""Greedy STRIPS planner with per-domain heuristics learned to rank."""

from .errors import LayoutMismatch, RankplanError

__all__ = ["RankplanError", "LayoutMismatch"]
__version__ = "0.1.0"
