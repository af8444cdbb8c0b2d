"""Builders for small ground problems and independent oracles used by the tests.

Nothing here calls into the planner's search, refinement or network code;
the oracles only use the model's value types.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from htep.model import (
    END,
    START,
    DurativeAction,
    GroundProblem,
    Method,
    SnapAction,
    TaskNetwork,
    TemporalConstraint,
    TimeVar,
    end_name,
    prop,
    start_name,
    task_name,
)

ROOT = Path(__file__).resolve().parent.parent
BENCH = ROOT / "benchmarks"


def atoms(names) -> frozenset:
    return frozenset(prop(n) for n in names)


def snap(name, pre=(), add=(), dele=()) -> SnapAction:
    return SnapAction(task_name(name), atoms(pre), atoms(add), atoms(dele))


def durative(name, d, start_pre=(), start_add=(), start_del=(), inv=(), end_pre=(), end_add=(), end_del=()):
    n = task_name(name)
    return DurativeAction(
        n,
        SnapAction(start_name(n), atoms(start_pre), atoms(start_add), atoms(start_del)),
        SnapAction(end_name(n), atoms(end_pre), atoms(end_add), atoms(end_del)),
        atoms(inv),
        Fraction(d),
    )


def method(name, task, subtasks, constraints=()) -> Method:
    """``constraints`` are ``(i, 's'|'e', rel, j, 's'|'e')`` over subtask positions."""
    point = {"s": START, "e": END}
    cs = tuple(
        TemporalConstraint(TimeVar(i, point[pi]), rel, TimeVar(j, point[pj]))
        for i, pi, rel, j, pj in constraints
    )
    return Method(name, task_name(task), tuple(task_name(t) for t in subtasks), cs)


def problem(
    snaps=(), durs=(), methods=(), abstract=(), init=(), goal=(), tasks=(), constraints=(), name="p"
) -> GroundProblem:
    point = {"s": START, "e": END}
    network = TaskNetwork(
        tuple(task_name(t) for t in tasks),
        tuple(
            TemporalConstraint(TimeVar(i, point[pi]), rel, TimeVar(j, point[pj]))
            for i, pi, rel, j, pj in constraints
        ),
    )
    props = set(atoms(init)) | set(atoms(goal))
    for a in snaps:
        props |= a.preconditions | a.add_effects | a.delete_effects
    for a in durs:
        props |= a.invariants
        for s in (a.start, a.end):
            props |= s.preconditions | s.add_effects | s.delete_effects
    return GroundProblem(
        name=name,
        propositions=frozenset(props),
        abstract_tasks=frozenset(task_name(t) for t in abstract),
        durative_actions={a.name: a for a in durs},
        snap_actions={a.name: a for a in snaps},
        methods=tuple(methods),
        initial_state=atoms(init),
        network=network,
        goal=atoms(goal),
    )


# point algebra oracle -----------------------------------------------------------

HOLDS = {
    "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y,
    "=": lambda x, y: x == y,
    "!=": lambda x, y: x != y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
}


def total_preorders(n: int) -> list[tuple[int, ...]]:
    """Dense rank vectors of all weak orderings of ``n`` items."""
    out = []
    for ranks in itertools.product(range(n), repeat=n):
        if set(ranks) == set(range(max(ranks, default=-1) + 1)):
            out.append(ranks)
    return out


_PREORDERS: dict[int, list] = {}


def brute_consistent(n: int, constraints) -> bool:
    """Some total preorder of variables ``0..n-1`` satisfies every ``(a, rel, b)``."""
    if n not in _PREORDERS:
        _PREORDERS[n] = total_preorders(n)
    return any(all(HOLDS[r](ranks[a], ranks[b]) for a, r, b in constraints) for ranks in _PREORDERS[n])


# constraint evaluation and STN oracle ------------------------------------------------


def satisfies(assignment, c: TemporalConstraint) -> bool:
    """Independent evaluation of one constraint against a timestamp map."""
    left, right = assignment[c.left], assignment[c.right]
    if c.offset is not None:
        return left - right == c.offset
    return HOLDS[c.relation](left, right)


def floyd_warshall_earliest(variables, constraints, epsilon, origin=None):
    """Earliest times under difference constraints, or None when infeasible.

    All times are at least 0 and ``origin`` (if given) is pinned to 0.
    ``!=`` constraints are not supported here.
    """
    idx = {v: i + 1 for i, v in enumerate(variables)}
    n = len(variables) + 1  # node 0 is the zero reference
    inf = None
    d = [[inf] * n for _ in range(n)]

    def edge(u, v, w):  # x_v - x_u <= w
        if d[u][v] is None or w < d[u][v]:
            d[u][v] = Fraction(w)

    for i in range(n):
        edge(i, i, 0)
    for i in range(1, n):
        edge(i, 0, 0)  # x_0 - x_i <= 0, i.e. x_i >= 0
    if origin is not None:
        edge(0, idx[origin], 0)
    for c in constraints:
        a, b = idx[c.left], idx[c.right]
        if c.offset is not None:
            edge(b, a, c.offset)
            edge(a, b, -c.offset)
            continue
        rel = c.relation
        if rel in (">", ">="):
            a, b, rel = b, a, {">": "<", ">=": "<="}[rel]
        if rel == "<":
            edge(b, a, -epsilon)
        elif rel == "<=":
            edge(b, a, 0)
        elif rel == "=":
            edge(a, b, 0)
            edge(b, a, 0)
        else:
            raise ValueError("!= is not an STN constraint")
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik is None:
                continue
            di = d[i]
            for j in range(n):
                if dk[j] is not None and (di[j] is None or dik + dk[j] < di[j]):
                    di[j] = dik + dk[j]
    if any(d[i][i] < 0 for i in range(n)):
        return None
    # earliest time of x_i is -(shortest path i -> 0)
    return {v: -d[idx[v]][0] for v in variables}


# brute-force refiner and scheduler ------------------------------------------------------


@dataclass
class _Event:
    key: tuple
    action: SnapAction
    durative: DurativeAction | None = None
    start_of: tuple | None = None  # key of the matching start event for an end event


def decompositions(problem: GroundProblem, max_depth: int = 6):
    """Every full refinement of the initial network into primitive tasks.

    Yields ``(primitives, constraints)``: primitives maps a path key to a
    task name; constraints are over TimeVar-like pairs ``(key, endpoint)``.
    Abstract tasks keep their two interface points.
    """
    top = [((i,), name) for i, name in enumerate(problem.network.tasks)]
    cons = []
    for c in problem.network.constraints:
        cons.append((((c.left.owner,), c.left.endpoint), c.relation, (((c.right.owner,), c.right.endpoint))))
    for key, _ in top:
        cons.append(((("t0",), END), "<=", (key, START)))
        cons.append(((key, END), "<=", (("goal",), START)))
    cons.append(((("t0",), END), "<", (("goal",), START)))

    def expand(pending, prims, cons, depth):
        if not pending:
            yield dict(prims), list(cons)
            return
        (key, name), rest = pending[0], pending[1:]
        if problem.is_snap(name) or problem.is_durative(name):
            yield from expand(rest, prims + [(key, name)], cons, depth)
            return
        if depth >= max_depth:
            return
        for m in problem.methods_for.get(name, ()):
            subs = [(key + (m.name, k), u) for k, u in enumerate(m.subtasks)]
            extra = [((key, START), "<=", (key, END))]
            for sk, _ in subs:
                extra.append(((key, START), "<=", (sk, START)))
                extra.append(((sk, END), "<=", (key, END)))
            for c in m.constraints:
                extra.append(
                    ((subs[c.left.owner][0], c.left.endpoint), c.relation, (subs[c.right.owner][0], c.right.endpoint))
                )
            yield from expand(subs + rest, prims, cons + extra, depth + 1)

    yield from expand(top, [], cons, 0)


def brute_solvable(problem: GroundProblem, epsilon=Fraction(1, 1000), max_depth: int = 6) -> bool:
    """Exhaustive refinement plus scheduling.

    For each full decomposition, every ordered partition of its snap events
    into simultaneous groups is tried: groups are executed in order from the
    initial state, preconditions must hold strictly before their group, and
    events in one group may not interfere.  A protected invariant may not be
    deleted by another event from its start up to and including its end,
    unless the method constraints force that event to coincide with the end.
    The surviving ordering is then checked for a metric schedule with
    difference constraints, strict steps being ``epsilon`` apart.
    """
    for prims, cons in decompositions(problem, max_depth):
        if _schedulable(problem, prims, cons, epsilon):
            return True
    return False


def _interfere(a: SnapAction, b: SnapAction) -> bool:
    return bool(
        a.delete_effects & (b.preconditions | b.add_effects)
        or b.delete_effects & (a.preconditions | a.add_effects)
    )


def _schedulable(problem, prims, cons, epsilon) -> bool:
    init = SnapAction(task_name("__init__"), frozenset(), problem.initial_state, frozenset())
    goal = SnapAction(task_name("__goal__"), problem.goal, frozenset(), frozenset())
    events: list[_Event] = [_Event(("t0",), init), _Event(("goal",), goal)]
    point_of: dict = {(("t0",), START): 0, (("t0",), END): 0, (("goal",), START): 1, (("goal",), END): 1}
    durations = []
    for key, name in sorted(prims.items(), key=lambda kv: str(kv[0])):
        if problem.is_snap(name):
            point_of[(key, START)] = point_of[(key, END)] = len(events)
            events.append(_Event(key, problem.snap_actions[name]))
        else:
            a = problem.durative_actions[name]
            if a.start.delete_effects & a.invariants:
                return False
            s = len(events)
            start = SnapAction(a.start.name, a.start.preconditions | a.invariants, a.start.add_effects, a.start.delete_effects)
            events.append(_Event(key + ("s",), start, a))
            events.append(_Event(key + ("e",), a.end, a, start_of=key + ("s",)))
            point_of[(key, START)], point_of[(key, END)] = s, s + 1
            durations.append((s, s + 1, a.duration))
    n = len(events)
    # constraints whose both sides are events can prune the ordering search
    event_cons = [(point_of[l], r, point_of[rr]) for l, r, rr in cons if l in point_of and rr in point_of]
    start_index = {e.key: i for i, e in enumerate(events)}
    intervals = [(start_index[e.start_of], i, e.durative) for i, e in enumerate(events) if e.start_of]

    order: list[list[int]] = []
    placed = [None] * n

    def group_ok(group, state, rank):
        acts = [events[i].action for i in group]
        for a in acts:
            if not a.preconditions <= state:
                return False
        for x, y in itertools.combinations(acts, 2):
            if _interfere(x, y):
                return False
        gs = set(group)
        for i in group:
            e = events[i]
            if e.start_of is not None and placed[start_index[e.start_of]] is None:
                return False
        if 1 in gs and len(gs) + sum(p is not None for p in placed) != n:
            return False  # the goal sentinel comes last
        if rank == 0 and 0 not in gs:
            return False
        for a, r, b in event_cons:
            ra = rank if a in gs else placed[a]
            rb = rank if b in gs else placed[b]
            if ra is None and rb is not None:
                if r in ("<", "<=", "="):
                    return False
            if rb is None and ra is not None:
                if r in (">", ">=", "="):
                    return False
            if ra is not None and rb is not None and not HOLDS[r](ra, rb):
                return False
        return True

    same = _entailed_equal(cons, point_of)

    def invariants_ok(group, state, rank):
        for s, e, a in intervals:
            rs, re_ = placed[s], placed[e]
            if rs is None or rs > rank:
                continue
            if re_ is None or rank < re_:
                if not a.invariants <= state:
                    return False
            elif rank == re_:
                # a deleter sharing the end's timestamp must be entailed equal to it
                for i in group:
                    if i != e and events[i].action.delete_effects & a.invariants and (i, e) not in same:
                        return False
        return True

    def search(state, rank) -> bool:
        remaining = [i for i in range(n) if placed[i] is None]
        if not remaining:
            if not problem.goal <= state:
                return False
            return _metric_ok(events, placed, cons, point_of, durations, epsilon)
        for size in range(1, len(remaining) + 1):
            for group in itertools.combinations(remaining, size):
                if not group_ok(group, state, rank):
                    continue
                acts = [events[i].action for i in group]
                deleted = frozenset().union(*(a.delete_effects for a in acts))
                added = frozenset().union(*(a.add_effects for a in acts))
                new_state = (state - deleted) | added
                for i in group:
                    placed[i] = rank
                ok = invariants_ok(group, new_state, rank) and search(new_state, rank + 1)
                for i in group:
                    placed[i] = None
                if ok:
                    return True
        return False

    return search(frozenset(), 0)


def _entailed_equal(cons, point_of) -> set:
    """Event pairs forced equal by the qualitative ``<=``/``=`` constraints."""
    def node(point):
        return ("ev", point_of[point]) if point in point_of else ("if", point)

    succ: dict = {}
    for l, r, rr in cons:
        a, b = node(l), node(rr)
        if r in (">", ">="):
            a, b, r = b, a, r.replace(">", "<")
        if r in ("<=", "="):
            succ.setdefault(a, set()).add(b)
        if r == "=":
            succ.setdefault(b, set()).add(a)

    def reach(src):
        seen, todo = {src}, [src]
        while todo:
            for w in succ.get(todo.pop(), ()):
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    events = sorted({i for i in point_of.values()})
    reach_of = {i: reach(("ev", i)) for i in events}
    return {
        (i, j) for i in events for j in events
        if i != j and ("ev", j) in reach_of[i] and ("ev", i) in reach_of[j]
    }


def _metric_ok(events, placed, cons, point_of, durations, epsilon) -> bool:
    # variables: event ranks become time points; interface points are free
    var = {}

    def v(point):
        if point in point_of:
            return ("ev", point_of[point])
        return ("if", point)

    constraints = []
    for l, r, rr in cons:
        constraints.append(TemporalConstraint(v(l), r, v(rr)))
    for s, e, d in durations:
        constraints.append(TemporalConstraint(("ev", e), "=", ("ev", s), d))
    by_rank: dict[int, list[int]] = {}
    for i, r in enumerate(placed):
        by_rank.setdefault(r, []).append(i)
    ranks = sorted(by_rank)
    for r in ranks:
        members = by_rank[r]
        for x in members[1:]:
            constraints.append(TemporalConstraint(("ev", members[0]), "=", ("ev", x)))
    for r1, r2 in zip(ranks, ranks[1:]):
        constraints.append(TemporalConstraint(("ev", by_rank[r1][0]), "<", ("ev", by_rank[r2][0])))
    variables = list(dict.fromkeys([c.left for c in constraints] + [c.right for c in constraints]))
    for x in variables:
        var[x] = x
    return floyd_warshall_earliest(variables, constraints, epsilon, origin=("ev", 0)) is not None


# random tiny problems -------------------------------------------------------------------------


def random_tiny_problem(seed: int) -> GroundProblem:
    """At most 3 abstract tasks, 2 methods each, 6 durative actions."""
    rng = random.Random(seed)
    pool = [f"p{i}" for i in range(4)]

    def pick(k):
        return rng.sample(pool, rng.randint(0, k))

    durs = []
    for i in range(rng.randint(2, 6)):
        start_add = pick(1)
        start_del = [p for p in pick(1) if p not in start_add]
        end_add = pick(2)
        end_del = [p for p in pick(1) if p not in end_add]
        inv = [p for p in pick(1) if p not in start_del]
        durs.append(
            durative(f"d{i}", rng.randint(1, 3), start_pre=pick(1), start_add=start_add, start_del=start_del,
                     inv=inv, end_pre=pick(1) if rng.random() < 0.5 else [], end_add=end_add, end_del=end_del)
        )
    n_abs = rng.randint(1, 3)
    abstract = [f"a{i}" for i in range(n_abs)]
    methods = []
    for i, a in enumerate(abstract):
        for k in range(rng.randint(1, 2)):
            choices = [d.name.head for d in durs] + abstract[i + 1:]
            subs = [rng.choice(choices) for _ in range(rng.randint(0, 2))]
            cons = []
            if len(subs) == 2 and rng.random() < 0.6:
                cons.append((0, rng.choice("se"), rng.choice(["<", "<=", ">", "="]), 1, rng.choice("se")))
            try:
                methods.append(method(f"m{i}_{k}", a, subs, cons))
            except ValueError:
                methods.append(method(f"m{i}_{k}", a, subs))
    tasks = [abstract[0]] if rng.random() < 0.7 else [abstract[0], rng.choice([d.name.head for d in durs])]
    constraints = [(0, "e", "<", 1, "s")] if len(tasks) == 2 and rng.random() < 0.5 else []
    return problem(
        durs=durs, methods=methods, abstract=abstract, init=pick(3), goal=pick(2),
        tasks=tasks, constraints=constraints, name=f"tiny{seed}",
    )


def primitive_count(problem: GroundProblem) -> int:
    """Largest number of primitive tasks in any full decomposition."""
    return max((len(p) for p, _ in decompositions(problem)), default=0)
