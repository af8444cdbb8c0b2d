"""Independent plan validator.

Works by forward simulation of timestamped snap actions.  Durative
intervals are recovered by pairing start and end snaps on the action's
fixed duration, so invariants are checked against the original durative
actions rather than against the planner's causal links.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import groupby
from typing import Iterable, Sequence

from .model import GOAL_NAME, INIT_NAME, DurativeAction, GroundProblem, SnapAction, TaskName

KINDS = (
    "unsupported-precondition",
    "violated-invariant",
    "broken-link",
    "constraint-violation",
    "unrefined-task",
    "negative-time",
)


@dataclass
class Verdict:
    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.violations

    def add(self, kind: str, detail: str) -> None:
        assert kind in KINDS, kind
        self.violations.append((kind, detail))

    def report(self) -> str:
        if self.accepted:
            return "plan accepted\n"
        lines = [f"plan rejected: {len(self.violations)} violation(s)"]
        lines += [f"  [{kind}] {detail}" for kind, detail in self.violations]
        return "\n".join(lines) + "\n"


def _endpoint_index(problem: GroundProblem):
    starts: dict[TaskName, DurativeAction] = {}
    ends: dict[TaskName, DurativeAction] = {}
    for a in problem.durative_actions.values():
        starts[a.start.name] = a
        ends[a.end.name] = a
    return starts, ends


def _interfere(a: SnapAction, b: SnapAction) -> bool:
    return bool(
        a.delete_effects & (b.preconditions | b.add_effects)
        or b.delete_effects & (a.preconditions | a.add_effects)
    )


def pair_intervals(problem: GroundProblem, steps: Sequence[tuple[Fraction, TaskName]], verdict: Verdict):
    """Match every end snap with an open start of the same action exactly ``d`` earlier."""
    starts, ends = _endpoint_index(problem)
    open_starts: dict[TaskName, list[Fraction]] = {}
    intervals = []
    for time, name in sorted(steps, key=lambda s: s[0]):
        if name in starts:
            open_starts.setdefault(name, []).append(time)
        elif name in ends:
            action = ends[name]
            pending = open_starts.get(action.start.name, [])
            want = time - action.duration
            if want in pending:
                pending.remove(want)
                intervals.append((want, time, action))
            else:
                verdict.add(
                    "constraint-violation",
                    f"{name} at {time} has no start exactly {action.duration} earlier",
                )
    for name, pending in open_starts.items():
        for time in pending:
            verdict.add("constraint-violation", f"{name} at {time} is never ended")
    return intervals


def check_timeline(
    problem: GroundProblem,
    steps: Iterable[tuple[Fraction, TaskName]],
    verdict: Verdict | None = None,
    origin: Fraction = Fraction(0),
) -> Verdict:
    """Simulate timestamped snap actions from the initial sentinel at ``origin``.

    ``steps`` must not contain the initial sentinel; the goal is checked
    on the final state.
    """
    verdict = verdict if verdict is not None else Verdict()
    snaps = problem.snap_actions
    steps = [(Fraction(t), n) for t, n in steps]
    for t, name in steps:
        if name not in snaps:
            verdict.add("unrefined-task", f"{name} is not a snap action")
        if t < 0:
            verdict.add("negative-time", f"{name} at {t}")
    steps = [(t, n) for t, n in steps if n in snaps]
    intervals = pair_intervals(problem, steps, verdict)
    timeline = sorted([(Fraction(origin), INIT_NAME)] + steps, key=lambda s: s[0])
    state: frozenset = frozenset()
    for time, group in groupby(timeline, key=lambda s: s[0]):
        names = [n for _, n in group]
        actions = [snaps[n] for n in names]
        for action in actions:
            missing = action.preconditions - state
            for p in sorted(missing, key=str):
                verdict.add("unsupported-precondition", f"{action.name} at {time} needs {p}")
        for i in range(len(actions)):
            for j in range(i + 1, len(actions)):
                if _interfere(actions[i], actions[j]):
                    verdict.add(
                        "constraint-violation",
                        f"interfering {actions[i].name} and {actions[j].name} share time {time}",
                    )
        deleted = frozenset().union(*(a.delete_effects for a in actions))
        added = frozenset().union(*(a.add_effects for a in actions))
        state = (state - deleted) | added
        for start, end, action in intervals:
            if start <= time < end:
                for p in sorted(action.invariants - state, key=str):
                    verdict.add(
                        "violated-invariant",
                        f"{action.name} [{start}, {end}] loses {p} after {time}",
                    )
    for p in sorted(problem.goal - state, key=str):
        verdict.add("unsupported-precondition", f"goal {p} false in final state")
    return verdict


def _holds(relation: str, left: Fraction, right: Fraction) -> bool:
    return {
        "<": left < right,
        "<=": left <= right,
        ">": left > right,
        ">=": left >= right,
        "=": left == right,
        "!=": left != right,
    }[relation]


def validate(problem: GroundProblem, plan, schedule) -> Verdict:
    """Check a planner result: structure, constraints, links, then the timeline."""
    verdict = Verdict()
    times = schedule.assignment
    snaps = problem.snap_actions
    for s, name in sorted(plan.alpha.items()):
        if name not in snaps:
            verdict.add("unrefined-task", f"task {s} {name} is not a snap task")

    def when(symbol):
        return times.get(plan.var(symbol))

    for c in plan.network.constraints:
        left, right = times.get(c.left), times.get(c.right)
        if left is None or right is None:
            verdict.add("constraint-violation", f"{c}: unassigned variable")
            continue
        ok = (left - right == c.offset) if c.offset is not None else _holds(c.relation, left, right)
        if not ok:
            verdict.add("constraint-violation", f"{c} fails with {c.left}={left}, {c.right}={right}")

    snap_times = [
        (when(s), s, snaps[n]) for s, n in sorted(plan.alpha.items()) if n in snaps
    ]
    unassigned = [s for t, s, _ in snap_times if t is None]
    for s in unassigned:
        verdict.add("constraint-violation", f"task {s} has no timestamp")
    if unassigned:
        return verdict
    for link in plan.links:
        tp, tc = when(link.producer), when(link.consumer)
        p = link.proposition
        if not tp < tc:
            verdict.add("broken-link", f"{link}: producer at {tp} not before consumer at {tc}")
            continue
        producer = snaps[plan.alpha[link.producer]]
        if p not in producer.add_effects and p not in producer.preconditions:
            verdict.add("broken-link", f"{link}: producer neither adds nor requires {p}")
        for t, s, action in snap_times:
            if s in (link.producer, link.consumer):
                continue
            # a deleter sharing an endpoint's time is caught as interference
            if tp < t < tc and p in action.delete_effects:
                verdict.add("broken-link", f"{link}: {action.name} at {t} deletes {p}")
    origin = when(next(s for s, n in plan.alpha.items() if n == INIT_NAME))
    steps = [(t, a.name) for t, s, a in snap_times if a.name != INIT_NAME]
    check_timeline(problem, steps, verdict, origin=origin)
    goal_time = [t for t, s, a in snap_times if a.name == GOAL_NAME]
    late = [a.name for t, s, a in snap_times if goal_time and t > goal_time[0]]
    for name in late:
        verdict.add("constraint-violation", f"{name} scheduled after the goal sentinel")
    return verdict
