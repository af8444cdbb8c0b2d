from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import atoms, durative, method, snap
from htep.model import (
    DurativeAction,
    ModelError,
    SnapAction,
    TemporalConstraint,
    TimeVar,
    applicable,
    apply,
    constraint,
    prop,
    task_name,
)

ATOMS = st.frozensets(st.sampled_from("pqrstu"), max_size=4)


@pytest.mark.parametrize(
    "pre, state, expected",
    [((), (), True), (("p",), ("q",), False), (("p", "q"), ("p", "q", "r"), True)],
)
def test_applicable_examples(pre, state, expected):
    assert applicable(snap("a", pre=pre), atoms(state)) is expected


@pytest.mark.parametrize(
    "add, dele, state, expected",
    [((), (), ("p",), ("p",)), (("q",), ("p",), ("p",), ("q",)), (("p",), (), ("p",), ("p",))],
)
def test_apply_examples(add, dele, state, expected):
    assert apply(snap("a", add=add, dele=dele), atoms(state)) == atoms(expected)


def test_apply_rejects_inapplicable_action():
    with pytest.raises(ModelError, match="missing"):
        apply(snap("a", pre=("p",)), atoms(()))


def test_add_delete_overlap_rejected_at_construction():
    with pytest.raises(ModelError):
        snap("bad", add=("p",), dele=("p",))


@given(ATOMS, ATOMS, ATOMS, ATOMS)
def test_apply_matches_set_formula(pre, add, dele, extra):
    dele = dele - add
    action = SnapAction(task_name("a"), atoms(pre), atoms(add), atoms(dele))
    state = atoms(pre | extra)
    assert action.check()
    assert apply(action, state) == (state - atoms(dele)) | atoms(add)
    assert apply(action, state) == apply(action, set(state))


@given(st.text("abc", min_size=1, max_size=3), st.lists(st.text("xyz", min_size=1, max_size=2), max_size=3))
def test_propositions_are_interned(pred, args):
    a, b = prop(pred, *args), prop(pred, *list(args))
    assert a == b and hash(a) == hash(b)
    assert a is b


def test_durative_duration_must_be_positive():
    with pytest.raises(ModelError):
        durative("d", 0)
    assert durative("d", "5/2").duration == Fraction(5, 2)


def test_compiled_start_requires_invariants():
    d = durative("d", 2, start_pre=("p",), inv=("q",))
    assert d.compiled_start.preconditions == atoms("pq")
    assert d.start.preconditions == atoms("p")
    assert isinstance(d, DurativeAction)


def test_metric_offset_only_with_equality():
    s, e = TimeVar(0), TimeVar(0, 1)
    assert constraint(e, "=", s, 2).offset == 2
    with pytest.raises(ModelError):
        constraint(e, "<", s, 2)
    with pytest.raises(ModelError):
        constraint(e, "~", s)


def test_method_constraints_checked():
    with pytest.raises(ModelError, match="inconsistent"):
        method("m", "a", ["x", "y"], [(0, "e", "<", 1, "s"), (1, "s", "<", 0, "e")])
    with pytest.raises(ModelError, match="unknown subtask"):
        method("m", "a", ["x"], [(0, "e", "<", 1, "s")])
    assert method("m", "a", []).subtasks == ()


def test_constraint_str():
    c = TemporalConstraint(TimeVar(3, 1), "=", TimeVar(3, 0), Fraction(2))
    assert str(c) == "e3 - s3 = 2"
