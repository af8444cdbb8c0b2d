"""Ground data model: propositions, snap/durative actions, methods, problems.

Everything here is immutable once built.  Propositions and task names are
interned so that equal values are usually the same object, which makes
set membership and equality checks cheap during search.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple

if TYPE_CHECKING:
    from .plan import PartialPlan


class ModelError(ValueError):
    """Raised when a model element violates one of its invariants."""


_INTERN: dict[tuple, object] = {}


class Proposition(NamedTuple):
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate, *self.args)) + ")"


class TaskName(NamedTuple):
    head: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.head, *self.args)) + ")"


def prop(predicate: str, *args: str) -> Proposition:
    """Interned proposition constructor."""
    key = ("p", predicate, args)
    value = _INTERN.get(key)
    if value is None:
        value = _INTERN.setdefault(key, Proposition(predicate, tuple(args)))
    return value  # type: ignore[return-value]


def task_name(head: str, *args: str) -> TaskName:
    """Interned task-name constructor."""
    key = ("t", head, args)
    value = _INTERN.get(key)
    if value is None:
        value = _INTERN.setdefault(key, TaskName(head, tuple(args)))
    return value  # type: ignore[return-value]


START = 0
END = 1


class TimeVar(NamedTuple):
    owner: int
    endpoint: int = START

    def __str__(self) -> str:
        return f"{'s' if self.endpoint == START else 'e'}{self.owner}"


RELATIONS = ("<", "<=", ">", ">=", "=", "!=")


class TemporalConstraint(NamedTuple):
    """``left relation right``; with ``offset`` set it reads ``left - right = offset``."""

    left: TimeVar
    relation: str
    right: TimeVar
    offset: Fraction | None = None

    def __str__(self) -> str:
        if self.offset is not None:
            return f"{self.left} - {self.right} = {self.offset}"
        return f"{self.left} {self.relation} {self.right}"


def constraint(left: TimeVar, relation: str, right: TimeVar, offset=None) -> TemporalConstraint:
    if relation not in RELATIONS:
        raise ModelError(f"unknown relation {relation!r}")
    if offset is not None:
        if relation != "=":
            raise ModelError("metric offset only allowed with '='")
        offset = Fraction(offset)
    return TemporalConstraint(left, relation, right, offset)


@dataclass(frozen=True)
class SnapAction:
    name: TaskName
    preconditions: frozenset[Proposition] = frozenset()
    add_effects: frozenset[Proposition] = frozenset()
    delete_effects: frozenset[Proposition] = frozenset()

    def __post_init__(self):
        for attr in ("preconditions", "add_effects", "delete_effects"):
            value = getattr(self, attr)
            if not isinstance(value, frozenset):
                object.__setattr__(self, attr, frozenset(value))
        clash = self.add_effects & self.delete_effects
        if clash:
            raise ModelError(
                f"{self.name}: atoms both added and deleted: "
                + ", ".join(sorted(map(str, clash)))
            )

    def check(self) -> bool:
        return not (self.add_effects & self.delete_effects)


@dataclass(frozen=True)
class DurativeAction:
    """A durative action with fixed duration.

    ``start`` and ``end`` are the snap actions exactly as written in the
    domain.  ``compiled_start`` is the start snap actually used in plans:
    its preconditions also require the invariants, which are then protected
    up to the end snap by causal links.
    """

    name: TaskName
    start: SnapAction
    end: SnapAction
    invariants: frozenset[Proposition]
    duration: Fraction

    def __post_init__(self):
        object.__setattr__(self, "duration", Fraction(self.duration))
        object.__setattr__(self, "invariants", frozenset(self.invariants))
        if self.duration <= 0:
            raise ModelError(f"{self.name}: duration must be positive, got {self.duration}")

    @cached_property
    def compiled_start(self) -> SnapAction:
        return SnapAction(
            self.start.name,
            self.start.preconditions | self.invariants,
            self.start.add_effects,
            self.start.delete_effects,
        )


def start_name(name: TaskName) -> TaskName:
    return task_name(name.head + ".start", *name.args)


def end_name(name: TaskName) -> TaskName:
    return task_name(name.head + ".end", *name.args)


@dataclass(frozen=True)
class Method:
    """Decomposition of ``task`` into local subtasks ``0..n-1``.

    ``constraints`` range over ``TimeVar(i, START|END)`` for local index i.
    """

    name: str
    task: TaskName
    subtasks: tuple[TaskName, ...]
    constraints: tuple[TemporalConstraint, ...] = ()

    def __post_init__(self):
        n = len(self.subtasks)
        for c in self.constraints:
            for var in (c.left, c.right):
                if not 0 <= var.owner < n:
                    raise ModelError(f"method {self.name}: constraint {c} mentions unknown subtask")
        from .tpn import PointNetwork  # local: tpn imports model

        if not PointNetwork.from_constraints(self.constraints).consistent():
            raise ModelError(f"method {self.name}: ordering constraints are inconsistent")

    @property
    def alpha(self) -> dict[int, TaskName]:
        return dict(enumerate(self.subtasks))


INIT_NAME = task_name("__init__")
GOAL_NAME = task_name("__goal__")
INIT_SYMBOL = 0
GOAL_SYMBOL = 1


@dataclass(frozen=True)
class TaskNetwork:
    """The problem's initial task network (before sentinels are added)."""

    tasks: tuple[TaskName, ...] = ()
    constraints: tuple[TemporalConstraint, ...] = ()


@dataclass(frozen=True)
class GroundProblem:
    name: str
    propositions: frozenset[Proposition]
    abstract_tasks: frozenset[TaskName]
    durative_actions: Mapping[TaskName, DurativeAction]
    snap_actions: Mapping[TaskName, SnapAction]
    methods: tuple[Method, ...]
    initial_state: frozenset[Proposition]
    network: TaskNetwork
    goal: frozenset[Proposition] = frozenset()
    domain_name: str = ""
    methods_for: Mapping[TaskName, tuple[Method, ...]] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.methods_for is None:
            # methods that differ only in name yield identical refinements
            index: dict[TaskName, list[Method]] = {}
            seen = set()
            for m in self.methods:
                body = (m.task, m.subtasks, m.constraints)
                if body not in seen:
                    seen.add(body)
                    index.setdefault(m.task, []).append(m)
            object.__setattr__(self, "methods_for", {k: tuple(v) for k, v in index.items()})
        snaps = dict(self.snap_actions)
        snaps[INIT_NAME] = SnapAction(INIT_NAME, frozenset(), self.initial_state, frozenset())
        snaps[GOAL_NAME] = SnapAction(GOAL_NAME, self.goal, frozenset(), frozenset())
        for a in self.durative_actions.values():
            snaps[a.compiled_start.name] = a.compiled_start
            snaps[a.end.name] = a.end
        object.__setattr__(self, "snap_actions", snaps)

    @property
    def tasks(self) -> frozenset[TaskName]:
        return self.abstract_tasks | frozenset(self.durative_actions) | frozenset(self.snap_actions)

    def is_snap(self, name: TaskName) -> bool:
        return name in self.snap_actions

    def is_durative(self, name: TaskName) -> bool:
        return name in self.durative_actions

    def is_abstract(self, name: TaskName) -> bool:
        return name not in self.snap_actions and name not in self.durative_actions

    def refinable(self, name: TaskName) -> bool:
        return name in self.snap_actions or name in self.durative_actions or bool(self.methods_for.get(name))

    @cached_property
    def initial_plan(self) -> "PartialPlan":
        from .plan import initial_plan

        return initial_plan(self)


def applicable(action: SnapAction, state: Iterable[Proposition]) -> bool:
    state = state if isinstance(state, (set, frozenset)) else frozenset(state)
    return action.preconditions <= state


def apply(action: SnapAction, state: Iterable[Proposition]) -> frozenset[Proposition]:
    state = frozenset(state)
    if not action.preconditions <= state:
        missing = ", ".join(sorted(map(str, action.preconditions - state)))
        raise ModelError(f"{action.name} not applicable: missing {missing}")
    return (state - action.delete_effects) | action.add_effects
