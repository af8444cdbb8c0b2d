"""Temporal HTN planning in plan space (HTEP)."""
from __future__ import annotations

from .hddl import GroundingLimitError, HDDLError, ground, load, parse_domain, parse_problem
from .model import DurativeAction, GroundProblem, Method, SnapAction, prop, task_name
from .plan import PartialPlan, detect_flaws, initial_plan
from .search import SearchConfig, SearchResult, SearchStats, htep
from .tpn import PointNetwork, Schedule, solve_metric
from .validate import Verdict, validate

__all__ = [
    "DurativeAction",
    "GroundProblem",
    "GroundingLimitError",
    "HDDLError",
    "Method",
    "PartialPlan",
    "PointNetwork",
    "Schedule",
    "SearchConfig",
    "SearchResult",
    "SearchStats",
    "SnapAction",
    "Verdict",
    "detect_flaws",
    "ground",
    "htep",
    "initial_plan",
    "load",
    "parse_domain",
    "parse_problem",
    "prop",
    "solve_metric",
    "task_name",
    "validate",
]
__version__ = "0.1.0"
