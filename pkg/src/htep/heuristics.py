"""Plan-selection heuristics over a task decomposition graph, and flaw selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import START, GroundProblem, TaskName
from .plan import CausalThreat, Decomposition, Durative, Flaw, OpenPrecondition, PartialPlan
from .refine import count_resolvers, has_resolver

INF = math.inf

HEURISTICS = ("tdgm", "f_tc", "fape")
FLAW_STRATEGIES = ("lcfr", "fape")


@dataclass(frozen=True)
class HeuristicWeights:
    """Weights of the FAPE-style estimate, plus the threat term of h_tdgm."""

    unrefined: float = 3
    open_precondition: float = 1
    threat: float = 1
    tdgm_threat: float = 1


@dataclass
class TDG:
    """AND/OR task decomposition graph with fixpoint estimates.

    ``tc`` estimates how many primitive tasks a task expands into.
    ``mods`` estimates how many plan modifications (method applications,
    durative compilations, causal links) a task still needs.
    """

    problem: GroundProblem
    tasks: tuple[TaskName, ...]
    tc: dict[TaskName, float] = field(default_factory=dict)
    mods: dict[TaskName, float] = field(default_factory=dict)
    iterations: int = 0
    # proposition -> non-snap task names whose refinements may add it
    achievers: dict = field(default_factory=dict)


def reachable_tasks(problem: GroundProblem, roots: Iterable[TaskName]) -> list[TaskName]:
    seen = dict.fromkeys(roots)
    todo = list(seen)
    while todo:
        name = todo.pop()
        for m in problem.methods_for.get(name, ()):
            for u in m.subtasks:
                if u not in seen:
                    seen[u] = None
                    todo.append(u)
    return list(seen)


def build_tdg(problem: GroundProblem) -> TDG:
    roots = list(problem.network.tasks) + list(problem.abstract_tasks) + list(problem.durative_actions)
    tasks = reachable_tasks(problem, roots)
    tdg = TDG(problem, tuple(tasks))
    snaps, durs = problem.snap_actions, problem.durative_actions
    tc: dict[TaskName, float] = {}
    mods: dict[TaskName, float] = {}
    abstract = []
    for name in tasks:
        if name in snaps:
            tc[name] = 1
            mods[name] = len(snaps[name].preconditions)
        elif name in durs:
            a = durs[name]
            tc[name] = 2
            mods[name] = (
                1 + len(a.compiled_start.preconditions) + len(a.end.preconditions - a.invariants)
            )
        else:
            tc[name] = mods[name] = INF
            abstract.append(name)
    changed = True
    while changed:
        changed = False
        tdg.iterations += 1
        for name in abstract:
            best_tc, best_mod = tc[name], mods[name]
            for m in problem.methods_for.get(name, ()):
                best_tc = min(best_tc, sum(tc[u] for u in m.subtasks))
                best_mod = min(best_mod, 1 + sum(mods[u] for u in m.subtasks))
            if best_tc < tc[name] or best_mod < mods[name]:
                tc[name], mods[name] = best_tc, best_mod
                changed = True
    tdg.tc, tdg.mods = tc, mods
    tdg.achievers = _achievers(problem, tasks)
    return tdg


def _achievers(problem: GroundProblem, tasks: Sequence[TaskName]) -> dict:
    snaps, durs = problem.snap_actions, problem.durative_actions
    adds: dict[TaskName, frozenset] = {}
    abstract = []
    for name in tasks:
        if name in snaps:
            adds[name] = snaps[name].add_effects
        elif name in durs:
            adds[name] = durs[name].start.add_effects | durs[name].end.add_effects
        else:
            adds[name] = frozenset()
            abstract.append(name)
    changed = True
    while changed:
        changed = False
        for name in abstract:
            new = adds[name].union(*(adds[u] for m in problem.methods_for.get(name, ()) for u in m.subtasks))
            if len(new) != len(adds[name]):
                adds[name] = new
                changed = True
    out: dict = {}
    for name in tasks:
        if name not in snaps:
            for p in adds[name]:
                out.setdefault(p, set()).add(name)
    return out


def pending_provider(plan: PartialPlan, flaw: OpenPrecondition, tdg: TDG) -> bool:
    """Whether an unrefined task could still yield a producer for the flaw.

    The unrefined task must be able to start before the needing snap.
    """
    names = tdg.achievers.get(flaw.proposition)
    if not names:
        return False
    snaps = plan.problem.snap_actions
    net = plan.network
    needer = plan.var(flaw.task)
    return any(
        n in names and net.can_precede(plan.var(s, START), needer)
        for s, n in plan.alpha.items()
        if n not in snaps
    )


def dead_end(plan: PartialPlan, tdg: TDG) -> bool:
    """Some flaw can never be resolved, whatever refinements follow.

    Orderings only tighten, so a threat without resolvers stays so, and an
    open precondition without a usable producer stays so unless an
    unrefined task may still supply one.
    """
    for f in plan.flaws:
        if isinstance(f, CausalThreat):
            if not has_resolver(plan, f):
                return True
        elif isinstance(f, OpenPrecondition):
            if not has_resolver(plan, f) and not pending_provider(plan, f, tdg):
                return True
    return False


def _estimate(table: dict[TaskName, float], name: TaskName) -> float:
    return table.get(name, INF)


def h_f_tc(plan: PartialPlan, tdg: TDG) -> float:
    """Number of flaws plus the task-count estimate of unrefined tasks."""
    snaps = plan.problem.snap_actions
    total = float(len(plan.flaws))
    for name in plan.alpha.values():
        if name not in snaps:
            total += _estimate(tdg.tc, name)
    return total


def h_tdgm(plan: PartialPlan, tdg: TDG, threat_weight: float = 1) -> float:
    """Remaining modifications: refinement steps, links still missing and
    one ordering per pending threat (scaled by ``threat_weight``)."""
    snaps = plan.problem.snap_actions
    total = 0.0
    preconditions = 0
    for s, name in plan.alpha.items():
        action = snaps.get(name)
        if action is None:
            total += _estimate(tdg.mods, name)
        else:
            preconditions += len(action.preconditions)
    placed = sum(
        1 for link in plan.links
        if link.proposition in snaps[plan.alpha[link.consumer]].preconditions
    )
    threats = sum(1 for f in plan.flaws if isinstance(f, CausalThreat)) if threat_weight else 0
    return max(0.0, total + preconditions - placed) + threat_weight * threats


def h_fape(plan: PartialPlan, weights: HeuristicWeights = HeuristicWeights()) -> float:
    unrefined = opens = threats = 0
    for f in plan.flaws:
        if isinstance(f, OpenPrecondition):
            opens += 1
        elif isinstance(f, CausalThreat):
            threats += 1
        else:
            unrefined += 1
    return weights.unrefined * unrefined + weights.open_precondition * opens + weights.threat * threats


def evaluate(name: str, plan: PartialPlan, tdg: TDG, weights: HeuristicWeights = HeuristicWeights()) -> float:
    if name == "tdgm":
        return h_tdgm(plan, tdg, weights.tdgm_threat)
    if name == "f_tc":
        return h_f_tc(plan, tdg)
    if name == "fape":
        return h_fape(plan, weights)
    raise ValueError(f"unknown heuristic {name!r}; expected one of {HEURISTICS}")


_FAPE_TIER = {Durative: 0, Decomposition: 0, OpenPrecondition: 1, CausalThreat: 2}


def select_flaw(
    plan: PartialPlan, flaws: Sequence[Flaw], strategy: str = "lcfr", tdg: TDG | None = None
) -> Flaw:
    """Pick the flaw to resolve next.

    ``lcfr``: fewest resolvers, ties by kind (durative, decomposition,
    threat, open precondition) then by flaw key.  Open preconditions that an
    unrefined task may still provide are postponed, since their resolver set
    is not final yet.  ``fape``: same ordering inside the first non-empty
    tier of unrefined tasks, open preconditions, threats.
    """
    if not flaws:
        raise ValueError("no flaws to select from")
    if strategy == "lcfr":
        tdg = tdg if tdg is not None else build_tdg(plan.problem)
        pool = [
            f for f in flaws
            if not (isinstance(f, OpenPrecondition) and pending_provider(plan, f, tdg))
        ]
    elif strategy == "fape":
        top = min(_FAPE_TIER[type(f)] for f in flaws)
        pool = [f for f in flaws if _FAPE_TIER[type(f)] == top]
    else:
        raise ValueError(f"unknown flaw strategy {strategy!r}")
    best, best_key = None, None
    for f in sorted(pool, key=lambda f: f.key):
        key = (count_resolvers(plan, f), f.key)
        if best_key is None or key < best_key:
            best, best_key = f, key
            if key[0] == 0:
                break
    return best
