"""Best-first plan-space search (HTEP)."""
from __future__ import annotations

import heapq
import logging
import math
import resource
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .heuristics import (
    FLAW_STRATEGIES,
    HEURISTICS,
    HeuristicWeights,
    build_tdg,
    dead_end,
    evaluate,
    select_flaw,
)
from .model import GroundProblem
from .plan import PartialPlan, initial_plan, schedule_network
from .refine import apply_resolver, resolvers_for
from .tpn import DEFAULT_EPSILON, Schedule, solve_metric

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    heuristic: str = "tdgm"
    flaw_strategy: str = "fape"
    epsilon: Fraction = DEFAULT_EPSILON
    node_cap: int = 200_000
    time_budget: float = 64.0
    memory_budget_mb: int = 2048
    eager_metric: bool = False
    forward_check: bool = True
    seed: int = 0
    weights: HeuristicWeights = field(default_factory=HeuristicWeights)

    def __post_init__(self):
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"heuristic must be one of {HEURISTICS}")
        if self.flaw_strategy not in FLAW_STRATEGIES:
            raise ValueError(f"flaw strategy must be one of {FLAW_STRATEGIES}")
        if self.epsilon <= 0 or self.node_cap <= 0 or self.time_budget <= 0 or self.memory_budget_mb <= 0:
            raise ValueError("epsilon and budgets must be positive")

    @property
    def name(self) -> str:
        return f"htep+{self.heuristic}/{self.flaw_strategy}"


@dataclass
class SearchStats:
    outcome: str = "unsolvable"
    expanded: int = 0
    generated: int = 0
    qualitative_dead_ends: int = 0
    metric_dead_ends: int = 0
    pruned: int = 0
    peak_open: int = 0
    wall_time: float = 0.0

    def block(self, with_time: bool = False) -> str:
        """``key = value`` lines; wall time only on request (it is not reproducible)."""
        items = asdict(self)
        if not with_time:
            items.pop("wall_time")
        else:
            items["wall_time"] = f"{self.wall_time:.3f}"
        return "".join(f"{k} = {v}\n" for k, v in items.items())


@dataclass
class SearchResult:
    plan: PartialPlan | None
    schedule: Schedule | None
    stats: SearchStats

    @property
    def solved(self) -> bool:
        return self.plan is not None


class _Budget:
    def __init__(self, config: SearchConfig):
        self.deadline = time.monotonic() + config.time_budget
        self.node_cap = config.node_cap
        self.memory_kb = config.memory_budget_mb * 1024

    def check(self, stats: SearchStats) -> str | None:
        if stats.expanded >= self.node_cap:
            return "nodes"
        if stats.expanded % 64 == 0:
            if time.monotonic() > self.deadline:
                return "timeout"
            if resource.getrusage(resource.RUSAGE_SELF).ru_maxrss > self.memory_kb:
                return "memory"
        return None


def htep(problem: GroundProblem, config: SearchConfig = SearchConfig()) -> SearchResult:
    """Search plan space for a flaw-free plan with a feasible schedule.

    Plans are expanded best-first by heuristic value, ties broken by
    creation order, so runs are reproducible.  Children whose qualitative
    network is inconsistent are dropped; flaw-free plans whose metric
    network is infeasible are discarded and the search goes on.  With
    ``forward_check``, children holding a flaw that can never be resolved
    are pruned before they reach the open list.
    """
    started = time.monotonic()
    stats = SearchStats()
    budget = _Budget(config)
    tdg = build_tdg(problem)
    root = initial_plan(problem)
    result = SearchResult(None, None, stats)
    if not root.network.consistent():
        stats.wall_time = time.monotonic() - started
        return result
    counter = 0
    frontier = [(evaluate(config.heuristic, root, tdg, config.weights), counter, root)]
    stats.generated = 1
    while frontier:
        reason = budget.check(stats)
        if reason:
            stats.outcome = reason
            break
        _, _, plan = heapq.heappop(frontier)
        stats.expanded += 1
        flaws = plan.flaws
        if not flaws:
            schedule = solve_metric(schedule_network(plan), config.epsilon)
            if schedule is not None:
                stats.outcome = "solved"
                result.plan, result.schedule = plan, schedule
                break
            stats.metric_dead_ends += 1
            continue
        flaw = select_flaw(plan, flaws, config.flaw_strategy, tdg)
        for resolver in resolvers_for(plan, flaw):
            child = apply_resolver(plan, resolver)
            if child is None:
                stats.qualitative_dead_ends += 1
                continue
            if config.eager_metric and solve_metric(child.network, config.epsilon) is None:
                stats.metric_dead_ends += 1
                continue
            h = evaluate(config.heuristic, child, tdg, config.weights)
            if h == math.inf or (config.forward_check and dead_end(child, tdg)):
                stats.pruned += 1
                continue
            counter += 1
            stats.generated += 1
            heapq.heappush(frontier, (h, counter, child))
        if len(frontier) > stats.peak_open:
            stats.peak_open = len(frontier)
    stats.wall_time = time.monotonic() - started
    log.info("%s: %s after %d expansions", problem.name, stats.outcome, stats.expanded)
    return result
