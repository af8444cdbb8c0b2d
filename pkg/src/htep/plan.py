"""Partial temporal plans and flaw detection."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Union

from .model import (
    END,
    GOAL_SYMBOL,
    INIT_SYMBOL,
    START,
    GroundProblem,
    Proposition,
    SnapAction,
    TaskName,
    TemporalConstraint,
    TimeVar,
    INIT_NAME,
    GOAL_NAME,
)
from .tpn import PointNetwork


@dataclass(frozen=True, slots=True)
class CausalLink:
    producer: int
    consumer: int
    proposition: Proposition

    def __str__(self) -> str:
        return f"{self.producer} -{self.proposition}-> {self.consumer}"


@dataclass(frozen=True, slots=True)
class OpenPrecondition:
    task: int
    proposition: Proposition
    rank = 3

    @property
    def key(self):
        return (self.rank, self.task, self.proposition)


@dataclass(frozen=True, slots=True)
class CausalThreat:
    task: int
    link: CausalLink
    rank = 2

    @property
    def key(self):
        link = self.link
        return (self.rank, self.task, link.consumer, link.producer, link.proposition)


@dataclass(frozen=True, slots=True)
class Decomposition:
    task: int
    rank = 1

    @property
    def key(self):
        return (self.rank, self.task)


@dataclass(frozen=True, slots=True)
class Durative:
    task: int
    rank = 0

    @property
    def key(self):
        return (self.rank, self.task)


Flaw = Union[OpenPrecondition, CausalThreat, Decomposition, Durative]


@dataclass(frozen=True, slots=True)
class Compiled:
    """Record of a durative task compiled into its two snap tasks."""

    task: int
    action: TaskName
    start: int
    end: int


@dataclass(frozen=True, eq=False)
class PartialPlan:
    """A partial temporal plan ``(T, alpha, C, L)``.

    ``alpha`` maps task symbols to task names; its keys are ``T``.  The
    temporal constraints live in ``network`` (``network.constraints`` is
    ``C``).  Snap tasks produced by compiling a durative task ``t`` are
    anchored on ``t``'s own start/end variables, so constraints written
    against ``t`` keep constraining its snap actions.
    """

    problem: GroundProblem = field(repr=False)
    alpha: Mapping[int, TaskName]
    network: PointNetwork = field(repr=False)
    links: tuple[CausalLink, ...] = ()
    anchors: Mapping[int, TimeVar] = field(default_factory=dict)
    compiled: tuple[Compiled, ...] = ()
    next_symbol: int = 2
    depth: int = 0

    # structure -----------------------------------------------------------

    @property
    def tasks(self) -> tuple[int, ...]:
        return tuple(self.alpha)

    @property
    def constraints(self) -> tuple[TemporalConstraint, ...]:
        return self.network.constraints

    def var(self, symbol: int, endpoint: int = START) -> TimeVar:
        """Canonical time variable of a task endpoint (snap tasks have one)."""
        point = self._points.get(symbol)
        if point is not None:
            return point
        return TimeVar(symbol, endpoint)

    @cached_property
    def _points(self) -> dict[int, TimeVar]:
        """The single time point of every snap task."""
        snaps = self.problem.snap_actions
        anchors = self.anchors
        return {
            s: anchors.get(s) or TimeVar(s, START)
            for s, n in self.alpha.items()
            if n in snaps
        }

    def snap(self, symbol: int) -> SnapAction:
        return self.problem.snap_actions[self.alpha[symbol]]

    def kind(self, symbol: int) -> str:
        name = self.alpha[symbol]
        if self.problem.is_snap(name):
            return "snap"
        if self.problem.is_durative(name):
            return "durative"
        return "abstract"

    @cached_property
    def snap_tasks(self) -> tuple[int, ...]:
        snaps = self.problem.snap_actions
        return tuple(s for s, n in self.alpha.items() if n in snaps)

    @cached_property
    def supported(self) -> frozenset[tuple[int, Proposition]]:
        return frozenset((link.consumer, link.proposition) for link in self.links)

    @cached_property
    def flaws(self) -> tuple[Flaw, ...]:
        return detect_flaws(self)

    @cached_property
    def producers(self) -> dict[Proposition, tuple[int, ...]]:
        index: dict[Proposition, list[int]] = {}
        snaps = self.problem.snap_actions
        for s in self.snap_tasks:
            for p in snaps[self.alpha[s]].add_effects:
                index.setdefault(p, []).append(s)
        return {p: tuple(v) for p, v in index.items()}

    @cached_property
    def deleters(self) -> dict[Proposition, tuple[int, ...]]:
        index: dict[Proposition, list[int]] = {}
        snaps = self.problem.snap_actions
        for s in self.snap_tasks:
            for p in snaps[self.alpha[s]].delete_effects:
                index.setdefault(p, []).append(s)
        return {p: tuple(v) for p, v in index.items()}

    def signature(self) -> tuple:
        """Hashable structural summary, used by tests to compare plans."""
        return (
            tuple(sorted((s, str(n)) for s, n in self.alpha.items())),
            tuple(sorted(map(str, self.network.constraints))),
            tuple(sorted(map(str, self.links))),
        )

    def dump(self) -> str:
        return dump(self)


def initial_plan(problem: GroundProblem) -> PartialPlan:
    """Plan with t0, the goal sentinel, and the problem's initial network."""
    alpha: dict[int, TaskName] = {INIT_SYMBOL: INIT_NAME, GOAL_SYMBOL: GOAL_NAME}
    symbols = []
    for i, name in enumerate(problem.network.tasks):
        alpha[i + 2] = name
        symbols.append(i + 2)
    plan = PartialPlan(problem, alpha, PointNetwork(), next_symbol=2 + len(symbols))
    t0 = plan.var(INIT_SYMBOL, END)
    goal = plan.var(GOAL_SYMBOL, START)
    constraints = [TemporalConstraint(t0, "<", goal)]
    for s in symbols:
        constraints.append(TemporalConstraint(t0, "<=", plan.var(s, START)))
        constraints.append(TemporalConstraint(plan.var(s, END), "<=", goal))
    for c in problem.network.constraints:
        constraints.append(rename(plan, c, symbols))
    variables = [t0, goal] + [plan.var(s, e) for s in symbols for e in (START, END)]
    network = PointNetwork().with_variables(variables).add(*constraints)
    return PartialPlan(problem, alpha, network, next_symbol=plan.next_symbol)


def rename(plan: PartialPlan, c: TemporalConstraint, symbols) -> TemporalConstraint:
    """Map a constraint over local subtask indices onto plan symbols."""
    left = plan.var(symbols[c.left.owner], c.left.endpoint)
    right = plan.var(symbols[c.right.owner], c.right.endpoint)
    return TemporalConstraint(left, c.relation, right, c.offset)


def threatens(plan: PartialPlan, task: int, link: CausalLink) -> bool:
    """Whether snap ``task`` deletes the link's atom and may fall inside it."""
    if task == link.producer or task == link.consumer:
        return False
    if link.proposition not in plan.snap(task).delete_effects:
        return False
    net = plan.network
    k = plan.var(task)
    return net.can_precede(plan.var(link.producer), k) and net.can_precede(k, plan.var(link.consumer))


def detect_flaws(plan: PartialPlan) -> tuple[Flaw, ...]:
    """All flaws of ``plan``, in a deterministic order."""
    problem = plan.problem
    snaps = problem.snap_actions
    supported = plan.supported
    flaws: list[Flaw] = []
    for s, name in plan.alpha.items():
        action = snaps.get(name)
        if action is None:
            if name in problem.durative_actions:
                flaws.append(Durative(s))
            else:
                flaws.append(Decomposition(s))
            continue
        for p in action.preconditions:
            if (s, p) not in supported:
                flaws.append(OpenPrecondition(s, p))
    if plan.links:
        deleters = plan.deleters
        net = plan.network
        for link in plan.links:
            candidates = deleters.get(link.proposition)
            if not candidates:
                continue
            prod, cons = plan.var(link.producer), plan.var(link.consumer)
            for k in candidates:
                if k == link.producer or k == link.consumer:
                    continue
                kv = plan.var(k)
                if net.can_precede(prod, kv) and net.can_precede(kv, cons):
                    flaws.append(CausalThreat(k, link))
    flaws.sort(key=lambda f: f.key)
    return tuple(flaws)


def mutex(a: SnapAction, b: SnapAction) -> bool:
    """Snap actions that may not share a timestamp."""
    return bool(
        a.delete_effects & (b.preconditions | b.add_effects)
        or b.delete_effects & (a.preconditions | a.add_effects)
    )


def schedule_network(plan: PartialPlan) -> PointNetwork:
    """The plan's network plus ``!=`` between mutex snaps not yet ordered."""
    net = plan.network
    snaps = plan.snap_tasks
    extra = []
    for i, a in enumerate(snaps):
        va, sa = plan.var(a), plan.snap(a)
        for b in snaps[i + 1:]:
            vb = plan.var(b)
            if va == vb or net.entails_before(va, vb) or net.entails_before(vb, va):
                continue
            if mutex(sa, plan.snap(b)):
                extra.append(TemporalConstraint(va, "!=", vb))
    return net.add(*extra) if extra else net


def iter_snap_times(plan: PartialPlan, schedule) -> Iterator[tuple]:
    """``(time, symbol, snap action)`` for every snap task, sorted by time."""
    rows = [(schedule[plan.var(s)], s, plan.snap(s)) for s in plan.snap_tasks]
    rows.sort(key=lambda r: (r[0], r[1]))
    return iter(rows)


def dump(plan: PartialPlan) -> str:
    """Stable text rendering of a plan as a graph.

    One line per task, constraint and causal link, each section sorted.
    """
    lines = ["plan"]
    for s in sorted(plan.alpha):
        lines.append(f"task {s} {plan.kind(s)} {plan.alpha[s]} @ {plan.var(s, START)},{plan.var(s, END)}")
    for c in sorted(map(str, plan.network.constraints)):
        lines.append(f"constraint {c}")
    for link in sorted(plan.links, key=lambda l: (l.producer, l.consumer, str(l.proposition))):
        lines.append(f"link {link}")
    return "\n".join(lines) + "\n"
