from __future__ import annotations

from fractions import Fraction

import pytest

from helpers import BENCH, durative, problem, random_tiny_problem
from htep.hddl import load
from htep.model import GOAL_SYMBOL, INIT_SYMBOL, END, START, TimeVar, prop
from htep.plan import initial_plan
from htep.refine import add_link, compile_durative
from htep.search import htep as search
from htep.tpn import Schedule
from htep.validate import check_timeline, validate

F = Fraction
EPS = F(1, 1000)


def test_trivial_solution_accepted():
    pr = problem(init="p", goal="p")
    plan = add_link(initial_plan(pr), INIT_SYMBOL, GOAL_SYMBOL, prop("p"))
    sched = Schedule({TimeVar(INIT_SYMBOL): F(0), TimeVar(GOAL_SYMBOL): EPS})
    assert validate(pr, plan, sched).accepted


def test_goal_missing_rejected():
    pr = problem(goal="p")
    verdict = validate(pr, initial_plan(pr), Schedule({TimeVar(INIT_SYMBOL): F(0), TimeVar(GOAL_SYMBOL): EPS}))
    # once as the goal sentinel's precondition, once on the final state
    assert [k for k, _ in verdict.violations] == ["unsupported-precondition"] * 2


def test_unrefined_task_rejected():
    pr = problem(durs=[durative("d", 1)], tasks=["d"])
    plan = initial_plan(pr)
    sched = Schedule({v: F(0) for v in plan.network.variables})
    assert "unrefined-task" in {k for k, _ in validate(pr, plan, sched).violations}


# a rover drives while its camera calibrates; both need power throughout
ROVER = problem(
    durs=[
        durative("drive", 3, start_pre=["at-a", "power"], start_del=["at-a"], inv=["power"], end_add=["at-b"]),
        durative("calibrate", 2, start_pre=["power"], inv=["power"], end_add=["calibrated"]),
    ],
    tasks=["drive", "calibrate"],
    init=["at-a", "power"],
    goal=["at-b", "calibrated"],
)


def rover_plan():
    """drive = 2 -> snaps 4 (start), 5 (end); calibrate = 3 -> snaps 6, 7."""
    plan = compile_durative(compile_durative(initial_plan(ROVER), 2), 3)
    for producer, consumer, atom in [
        (INIT_SYMBOL, 4, "at-a"), (INIT_SYMBOL, 4, "power"), (INIT_SYMBOL, 6, "power"),
        (5, GOAL_SYMBOL, "at-b"), (7, GOAL_SYMBOL, "calibrated"),
    ]:
        plan = add_link(plan, producer, consumer, prop(atom))
    return plan


def rover_schedule(**shift):
    times = {"t0": F(0), "s2": F(1, 2), "e2": F(7, 2), "s3": F(1), "e3": F(3), "goal": F(4)}
    times.update(shift)
    return Schedule({
        TimeVar(INIT_SYMBOL): times["t0"],
        TimeVar(2, START): times["s2"], TimeVar(2, END): times["e2"],
        TimeVar(3, START): times["s3"], TimeVar(3, END): times["e3"],
        TimeVar(GOAL_SYMBOL): times["goal"],
    })


def test_hand_built_concurrent_plan_golden():
    # timeline walk:
    #   0    init                 {at-a, power}
    #   1/2  drive.start          {power}                  drive open [1/2, 7/2]
    #   1    calibrate.start      {power}                  calibrate open [1, 3], overlaps drive
    #   3    calibrate.end        {power, calibrated}
    #   7/2  drive.end            {power, calibrated, at-b}
    #   4    goal                 satisfied
    plan = rover_plan()
    verdict = validate(ROVER, plan, rover_schedule())
    assert verdict.report() == "plan accepted\n"
    assert rover_schedule().makespan == F(7, 2) < 3 + 2


def test_duration_off_by_epsilon_rejected():
    verdict = validate(ROVER, rover_plan(), rover_schedule(e2=F(7, 2) + EPS, goal=F(5)))
    kinds = {k for k, _ in verdict.violations}
    assert kinds == {"constraint-violation"}
    assert any("e2 - s2 = 3" in d for _, d in verdict.violations)


def test_invariant_deleted_midway_rejected():
    pr = problem(
        durs=[
            durative("hold", 2, start_pre="p", inv="p", end_add="q"),
            durative("drop", 1, start_del="p"),
        ],
        tasks=["hold", "drop"], init="p", goal="q",
    )
    hold, drop = pr.durative_actions.values()
    steps = [(F(1), hold.start.name), (F(3), hold.end.name), (F(2), drop.start.name), (F(3), drop.end.name)]
    verdict = check_timeline(pr, steps)
    assert "violated-invariant" in {k for k, _ in verdict.violations}
    # the same deleter placed exactly at the end of the interval is allowed
    steps = [(F(1), hold.start.name), (F(3), hold.end.name), (F(3), drop.start.name), (F(4), drop.end.name)]
    assert check_timeline(pr, steps).accepted


def test_interfering_snaps_at_one_time_rejected():
    pr = problem(durs=[durative("a", 1, start_del="p"), durative("b", 1, start_pre="p")], init="p")
    a, b = pr.durative_actions.values()
    steps = [(F(1), a.start.name), (F(1), b.start.name), (F(2), a.end.name), (F(2), b.end.name)]
    messages = [d for k, d in check_timeline(pr, steps).violations if k == "constraint-violation"]
    assert any("interfering" in m for m in messages)


def mutations(plan, schedule):
    """Schedules that move one variable just past the bound of one constraint."""
    times = dict(schedule.assignment)
    for c in plan.network.constraints:
        if c.relation == "!=" or c.left not in times or c.right not in times:
            continue
        right = times[c.right]
        if c.offset is not None:
            bad = right + c.offset + EPS
        else:
            bad = {"<": right, "<=": right + EPS, "=": right + EPS, ">": right, ">=": right - EPS}[c.relation]
        yield c, Schedule({**times, c.left: bad})


SOLVED = [random_tiny_problem(s) for s in range(40)] + [
    load(BENCH / "rover/domain.hddl", BENCH / "rover/p01.hddl"),
    load(BENCH / "areascan/domain.hddl", BENCH / "areascan/p01.hddl"),
]


@pytest.mark.parametrize("pr", SOLVED, ids=lambda p: p.name)
def test_single_timestamp_mutation_flips_verdict(pr):
    result = search(pr)
    if not result.solved:
        return
    assert validate(pr, result.plan, result.schedule).accepted
    for c, mutated in mutations(result.plan, result.schedule):
        assert not validate(pr, result.plan, mutated).accepted, c
