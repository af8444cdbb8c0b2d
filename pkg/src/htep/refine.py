"""Flaw resolvers: causal links, promotion/demotion, methods, durative compilation.

Every operation returns a new plan, or ``None`` when the added temporal
constraints make the qualitative network inconsistent.  Parents are never
modified.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .model import END, START, Method, TemporalConstraint
from .plan import (
    CausalLink,
    CausalThreat,
    Compiled,
    Decomposition,
    Durative,
    Flaw,
    OpenPrecondition,
    PartialPlan,
    rename,
)


@dataclass(frozen=True, slots=True)
class AddLink:
    producer: int
    consumer: int
    proposition: object


@dataclass(frozen=True, slots=True)
class Promote:
    """Order the threatening task after the link's consumer."""

    task: int
    link: CausalLink


@dataclass(frozen=True, slots=True)
class Demote:
    """Order the threatening task before the link's producer."""

    task: int
    link: CausalLink


@dataclass(frozen=True, slots=True)
class ApplyMethod:
    task: int
    method: Method


@dataclass(frozen=True, slots=True)
class CompileDurative:
    task: int


Resolver = Union[AddLink, Promote, Demote, ApplyMethod, CompileDurative]


def resolvers_for(plan: PartialPlan, flaw: Flaw) -> list[Resolver]:
    """All resolvers of ``flaw`` whose ordering is consistent with the plan."""
    net = plan.network
    if isinstance(flaw, OpenPrecondition):
        needer = plan.var(flaw.task)
        return [
            AddLink(u, flaw.task, flaw.proposition)
            for u in plan.producers.get(flaw.proposition, ())
            if u != flaw.task and net.can_precede(plan.var(u), needer)
        ]
    if isinstance(flaw, CausalThreat):
        k = plan.var(flaw.task)
        out: list[Resolver] = []
        if net.can_precede(k, plan.var(flaw.link.producer)):
            out.append(Demote(flaw.task, flaw.link))
        if net.can_precede(plan.var(flaw.link.consumer), k):
            out.append(Promote(flaw.task, flaw.link))
        return out
    if isinstance(flaw, Decomposition):
        methods = plan.problem.methods_for.get(plan.alpha[flaw.task], ())
        return [ApplyMethod(flaw.task, m) for m in methods]
    if isinstance(flaw, Durative):
        return [CompileDurative(flaw.task)]
    raise TypeError(f"not a flaw: {flaw!r}")


def has_resolver(plan: PartialPlan, flaw: Flaw) -> bool:
    """``count_resolvers(plan, flaw) > 0``, stopping at the first resolver."""
    net = plan.network
    if isinstance(flaw, OpenPrecondition):
        needer = plan.var(flaw.task)
        return any(
            u != flaw.task and net.can_precede(plan.var(u), needer)
            for u in plan.producers.get(flaw.proposition, ())
        )
    if isinstance(flaw, CausalThreat):
        k = plan.var(flaw.task)
        return net.can_precede(k, plan.var(flaw.link.producer)) or net.can_precede(
            plan.var(flaw.link.consumer), k
        )
    return count_resolvers(plan, flaw) > 0


def count_resolvers(plan: PartialPlan, flaw: Flaw) -> int:
    if isinstance(flaw, Durative):
        return 1
    if isinstance(flaw, Decomposition):
        return len(plan.problem.methods_for.get(plan.alpha[flaw.task], ()))
    return len(resolvers_for(plan, flaw))


def apply_resolver(plan: PartialPlan, resolver: Resolver) -> PartialPlan | None:
    if isinstance(resolver, AddLink):
        return add_link(plan, resolver.producer, resolver.consumer, resolver.proposition)
    if isinstance(resolver, Promote):
        return order(plan, resolver.link.consumer, "<", resolver.task)
    if isinstance(resolver, Demote):
        return order(plan, resolver.task, "<", resolver.link.producer)
    if isinstance(resolver, ApplyMethod):
        return apply_method(plan, resolver.task, resolver.method)
    if isinstance(resolver, CompileDurative):
        return compile_durative(plan, resolver.task)
    raise TypeError(f"not a resolver: {resolver!r}")


def refinements(plan: PartialPlan, flaw: Flaw) -> list[PartialPlan]:
    """Consistent children of ``plan`` for ``flaw``."""
    children = []
    for r in resolvers_for(plan, flaw):
        child = apply_resolver(plan, r)
        if child is not None:
            children.append(child)
    return children


def _child(plan: PartialPlan, network, **changes) -> PartialPlan:
    values = dict(
        problem=plan.problem,
        alpha=plan.alpha,
        network=network,
        links=plan.links,
        anchors=plan.anchors,
        compiled=plan.compiled,
        next_symbol=plan.next_symbol,
        depth=plan.depth + 1,
    )
    values.update(changes)
    return PartialPlan(**values)


def add_link(plan: PartialPlan, producer: int, consumer: int, proposition) -> PartialPlan | None:
    c = TemporalConstraint(plan.var(producer), "<", plan.var(consumer))
    if not plan.network.consistent_with(c):
        return None
    link = CausalLink(producer, consumer, proposition)
    return _child(plan, plan.network.add(c), links=plan.links + (link,))


def order(plan: PartialPlan, a: int, relation: str, b: int) -> PartialPlan | None:
    c = TemporalConstraint(plan.var(a), relation, plan.var(b))
    if not plan.network.consistent_with(c):
        return None
    return _child(plan, plan.network.add(c))


def apply_method(plan: PartialPlan, task: int, method: Method) -> PartialPlan | None:
    """Replace abstract ``task`` by the method's subtasks.

    The removed task's start/end variables stay in the network and bound
    the subtasks from both sides.
    """
    if plan.alpha[task] != method.task:
        raise ValueError(f"method {method.name} does not refine {plan.alpha[task]}")
    first = plan.next_symbol
    symbols = list(range(first, first + len(method.subtasks)))
    alpha = dict(plan.alpha)
    del alpha[task]
    for s, name in zip(symbols, method.subtasks):
        alpha[s] = name
    draft = _child(plan, plan.network, alpha=alpha, next_symbol=first + len(symbols))
    ts, te = plan.var(task, START), plan.var(task, END)
    constraints = [rename(draft, c, symbols) for c in method.constraints]
    for s in symbols:
        constraints.append(TemporalConstraint(ts, "<=", draft.var(s, START)))
        constraints.append(TemporalConstraint(draft.var(s, END), "<=", te))
    constraints.append(TemporalConstraint(ts, "<=", te))
    net = plan.network.with_variables(
        [draft.var(s, e) for s in symbols for e in (START, END)]
    ).add(*constraints)
    if not net.consistent():
        return None
    return _child(draft, net, depth=plan.depth + 1)


def compile_durative(plan: PartialPlan, task: int) -> PartialPlan | None:
    """Split durative ``task`` into start/end snap tasks on its own variables.

    An action whose start deletes one of its own invariants can never run;
    compiling it yields ``None``.
    """
    action = plan.problem.durative_actions[plan.alpha[task]]
    if action.start.delete_effects & action.invariants:
        return None
    first = plan.next_symbol
    s, e = first, first + 1
    ts, te = plan.var(task, START), plan.var(task, END)
    alpha = dict(plan.alpha)
    del alpha[task]
    alpha[s] = action.compiled_start.name
    alpha[e] = action.end.name
    anchors = dict(plan.anchors)
    anchors[s], anchors[e] = ts, te
    net = plan.network.add(
        TemporalConstraint(ts, "<", te),
        TemporalConstraint(te, "=", ts, action.duration),
    )
    if not net.consistent():
        return None
    links = plan.links + tuple(
        CausalLink(s, e, p) for p in sorted(action.invariants, key=str)
    )
    return _child(
        plan,
        net,
        alpha=alpha,
        anchors=anchors,
        links=links,
        compiled=plan.compiled + (Compiled(task, action.name, s, e),),
        next_symbol=first + 2,
    )
