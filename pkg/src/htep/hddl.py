"""Reader, printer and grounder for the HDDL subset used by the planner.

The accepted language is described in ``docs/hddl-subset.md``.  Parsing
produces plain dataclass ASTs that mirror the source; ``ground`` turns a
domain/problem pair into a :class:`~htep.model.GroundProblem`.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from .model import (
    END,
    START,
    DurativeAction,
    GroundProblem,
    Method,
    ModelError,
    SnapAction,
    TaskNetwork,
    TemporalConstraint,
    TimeVar,
    end_name,
    prop,
    start_name,
    task_name,
)


class HDDLError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


class GroundingLimitError(RuntimeError):
    """Grounding would produce more elements than the configured cap."""


# s-expressions ---------------------------------------------------------------


class Sym(str):
    """A lower-cased atom that remembers where it came from."""

    line: int
    col: int

    def __new__(cls, text: str, line: int = 0, col: int = 0):
        obj = super().__new__(cls, text)
        obj.line, obj.col = line, col
        return obj


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexpr(text: str) -> SList:
    """Parse one top-level s-expression; comments and case are dropped."""
    stack: list[SList] = []
    result = None
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            newlines = tok.count("\n")
            if newlines:
                line += newlines
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        if result is not None:
            raise HDDLError(f"unexpected text after end of definition: {tok!r}", line, col)
        if tok == "(":
            lst = SList()
            lst.line, lst.col = line, col
            stack.append(lst)
        elif tok == ")":
            if not stack:
                raise HDDLError("unbalanced ')'", line, col)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                result = done
        else:
            if not stack:
                raise HDDLError(f"atom {tok!r} outside any list", line, col)
            stack[-1].append(Sym(tok.lower(), line, col))
    if stack:
        raise HDDLError("unexpected end of input: missing ')'", stack[-1].line, stack[-1].col)
    if result is None:
        raise HDDLError("empty input")
    return result


def _where(node) -> tuple[int | None, int | None]:
    return getattr(node, "line", None), getattr(node, "col", None)


def _err(message: str, node=None) -> HDDLError:
    return HDDLError(message, *_where(node))


def _expect_list(node, what: str) -> SList:
    if not isinstance(node, list):
        raise _err(f"expected {what}, got {node!r}", node)
    return node


def _expect_sym(node, what: str) -> Sym:
    if isinstance(node, list):
        raise _err(f"expected {what}, got a list", node)
    return node


# ASTs --------------------------------------------------------------------------

Params = tuple[tuple[str, str], ...]
Atom = tuple[str, tuple[str, ...]]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: Params
    precondition: tuple[Atom, ...] = ()
    add: tuple[Atom, ...] = ()
    delete: tuple[Atom, ...] = ()


@dataclass(frozen=True)
class DurativeSchema:
    name: str
    parameters: Params
    duration: Fraction
    at_start: tuple[Atom, ...] = ()
    over_all: tuple[Atom, ...] = ()
    at_end: tuple[Atom, ...] = ()
    start_add: tuple[Atom, ...] = ()
    start_delete: tuple[Atom, ...] = ()
    end_add: tuple[Atom, ...] = ()
    end_delete: tuple[Atom, ...] = ()


@dataclass(frozen=True)
class Ordering:
    left: str
    left_point: int
    relation: str
    right: str
    right_point: int


@dataclass(frozen=True)
class Subtask:
    label: str
    task: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class MethodSchema:
    name: str
    parameters: Params
    task: str
    task_args: tuple[str, ...]
    subtasks: tuple[Subtask, ...] = ()
    ordering: tuple[Ordering, ...] = ()


@dataclass(frozen=True)
class DomainAST:
    name: str
    types: tuple[tuple[str, str], ...] = ()  # (type, parent)
    constants: tuple[tuple[str, str], ...] = ()
    predicates: tuple[tuple[str, Params], ...] = ()
    tasks: tuple[tuple[str, Params], ...] = ()
    actions: tuple[ActionSchema, ...] = ()
    durative_actions: tuple[DurativeSchema, ...] = ()
    methods: tuple[MethodSchema, ...] = ()

    @property
    def type_parent(self) -> dict[str, str]:
        return dict(self.types)

    @property
    def predicate_table(self) -> dict[str, Params]:
        return dict(self.predicates)

    @property
    def task_table(self) -> dict[str, Params]:
        table = dict(self.tasks)
        for a in self.actions:
            table[a.name] = a.parameters
        for a in self.durative_actions:
            table[a.name] = a.parameters
        return table


@dataclass(frozen=True)
class ProblemAST:
    name: str
    domain: str
    objects: tuple[tuple[str, str], ...] = ()
    subtasks: tuple[Subtask, ...] = ()
    ordering: tuple[Ordering, ...] = ()
    init: tuple[Atom, ...] = ()
    goal: tuple[Atom, ...] = ()


# parsing -------------------------------------------------------------------------


def _typed_list(items, node, allow_vars: bool) -> list[tuple[str, str]]:
    """``a b - t c`` -> [(a, t), (b, t), (c, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[Sym] = []
    i = 0
    while i < len(items):
        tok = _expect_sym(items[i], "name")
        if tok == "-":
            if i + 1 >= len(items) or not pending:
                raise _err("dangling '-' in typed list", tok)
            if isinstance(items[i + 1], list):
                raise _err("'either' types are not supported", tok)
            tpe = _expect_sym(items[i + 1], "type name")
            out.extend((p, str(tpe)) for p in pending)
            pending = []
            i += 2
            continue
        if allow_vars != tok.startswith("?"):
            raise _err(f"{'variable' if allow_vars else 'name'} expected, got {tok!r}", tok)
        pending.append(tok)
        i += 1
    out.extend((p, "object") for p in pending)
    return [(str(a), str(b)) for a, b in out]


def _sections(items, node, start: int) -> dict[str, object]:
    """Keyword/value pairs such as ``:parameters (...) :task (...)``."""
    out: dict[str, object] = {}
    i = start
    while i < len(items):
        key = items[i]
        if isinstance(key, list) or not key.startswith(":"):
            raise _err(f"expected a ':keyword', got {key!r}", key if not isinstance(key, list) else key)
        if i + 1 >= len(items):
            raise _err(f"missing value for {key}", key)
        if key in out:
            raise _err(f"duplicate {key}", key)
        out[str(key)] = items[i + 1]
        i += 2
    return out


def _conjuncts(node) -> list:
    if isinstance(node, list) and not node:
        return []
    node = _expect_list(node, "formula")
    if node and node[0] == "and":
        out = []
        for sub in node[1:]:
            out.extend(_conjuncts(sub))
        return out
    return [node]


def _atom(node) -> Atom:
    node = _expect_list(node, "atom")
    if not node:
        raise _err("empty atom", node)
    head = _expect_sym(node[0], "predicate")
    if head == "not":
        raise _err("negative conditions are not supported", head)
    if head in ("or", "imply", "exists", "forall", "when"):
        raise _err(f"'{head}' is not supported here", head)
    return str(head), tuple(str(_expect_sym(a, "argument")) for a in node[1:])


def _effects(node) -> tuple[list[Atom], list[Atom]]:
    adds, dels = [], []
    for lit in _conjuncts(node):
        if lit and lit[0] == "not":
            if len(lit) != 2:
                raise _err("malformed (not ...)", lit)
            dels.append(_atom(lit[1]))
        else:
            adds.append(_atom(lit))
    return adds, dels


def _task_ref(node) -> tuple[str, tuple[str, ...]]:
    node = _expect_list(node, "task")
    if not node:
        raise _err("empty task", node)
    return str(_expect_sym(node[0], "task name")), tuple(str(_expect_sym(a, "argument")) for a in node[1:])


def _subtasks(node, ordered: bool) -> tuple[list[Subtask], list[Ordering]]:
    items = _conjuncts(node)
    subtasks: list[Subtask] = []
    for k, item in enumerate(items):
        if len(item) == 2 and isinstance(item[1], list) and not isinstance(item[0], list):
            label = str(item[0])
            name, args = _task_ref(item[1])
        else:
            label = f"_t{k}"
            name, args = _task_ref(item)
        if any(s.label == label for s in subtasks):
            raise _err(f"duplicate subtask label {label}", item)
        subtasks.append(Subtask(label, name, args))
    ordering = []
    if ordered:
        for a, b in zip(subtasks, subtasks[1:]):
            ordering.append(Ordering(a.label, END, "<", b.label, START))
    return subtasks, ordering


_RELATIONS = {"<", "<=", ">", ">=", "=", "!="}


def _point(node, labels: set[str]) -> tuple[str, int | None]:
    if isinstance(node, list):
        if len(node) != 2 or node[0] not in ("start", "end"):
            raise _err("time point must be (start LABEL) or (end LABEL)", node)
        label = str(_expect_sym(node[1], "subtask label"))
        point = START if node[0] == "start" else END
    else:
        label, point = str(node), None
    if label not in labels:
        raise _err(f"unknown subtask label {label!r} in ordering", node)
    return label, point


def _ordering(node, labels: set[str]) -> list[Ordering]:
    out = []
    for item in _conjuncts(node):
        if len(item) != 3 or isinstance(item[0], list) or item[0] not in _RELATIONS:
            raise _err("ordering must be (REL A B) with REL in < <= > >= = !=", item)
        rel = str(item[0])
        (a, pa), (b, pb) = _point(item[1], labels), _point(item[2], labels)
        if pa is None and pb is None:
            # plain HDDL ordering: a before b means end(a) REL start(b)
            pa, pb = (START, END) if rel in (">", ">=") else (END, START)
        elif pa is None or pb is None:
            raise _err("mixing bare labels and (start/end LABEL) in one ordering", item)
        out.append(Ordering(a, pa, rel, b, pb))
    return out


def _duration(node) -> Fraction:
    node = _expect_list(node, ":duration")
    if len(node) != 3 or node[0] != "=" or node[1] != "?duration":
        raise _err("duration must be (= ?duration NUMBER)", node)
    try:
        value = Fraction(str(_expect_sym(node[2], "number")))
    except ValueError:
        raise _err(f"duration must be a literal number, got {node[2]!r}", node[2]) from None
    if value <= 0:
        raise _err("duration must be positive", node[2])
    return value


def _timed(node) -> dict[str, list]:
    out: dict[str, list] = {"start": [], "end": [], "all": []}
    for item in _conjuncts(node):
        if len(item) == 3 and item[0] == "at" and item[1] in ("start", "end"):
            out[str(item[1])].append(item[2])
        elif len(item) == 3 and item[0] == "over" and item[1] == "all":
            out["all"].append(item[2])
        else:
            raise _err("expected (at start F), (at end F) or (over all F)", item)
    return out


def _parse_durative(items, node) -> DurativeSchema:
    name = str(_expect_sym(items[1], "action name"))
    sec = _sections(items, node, 2)
    unknown = set(sec) - {":parameters", ":duration", ":condition", ":effect"}
    if unknown:
        raise _err(f"unsupported keys in durative action {name}: {sorted(unknown)}", node)
    params = tuple(_typed_list(sec.get(":parameters", SList()), node, True))
    if ":duration" not in sec:
        raise _err(f"durative action {name} lacks :duration", node)
    cond = _timed(sec.get(":condition", SList()))
    eff = _timed(sec.get(":effect", SList()))
    if eff["all"]:
        raise _err("over all effects are not supported", node)
    atoms = {k: [a for f in v for a in map(_atom, _conjuncts(f))] for k, v in cond.items()}
    sa, sd = [], []
    for f in eff["start"]:
        a, d = _effects(f)
        sa += a
        sd += d
    ea, ed = [], []
    for f in eff["end"]:
        a, d = _effects(f)
        ea += a
        ed += d
    return DurativeSchema(
        name, params, _duration(sec[":duration"]),
        tuple(atoms["start"]), tuple(atoms["all"]), tuple(atoms["end"]),
        tuple(sa), tuple(sd), tuple(ea), tuple(ed),
    )


def _parse_action(items, node) -> ActionSchema:
    name = str(_expect_sym(items[1], "action name"))
    sec = _sections(items, node, 2)
    unknown = set(sec) - {":parameters", ":precondition", ":effect"}
    if unknown:
        raise _err(f"unsupported keys in action {name}: {sorted(unknown)}", node)
    params = tuple(_typed_list(sec.get(":parameters", SList()), node, True))
    pre = tuple(_atom(a) for a in _conjuncts(sec.get(":precondition", SList())))
    adds, dels = _effects(sec.get(":effect", SList()))
    return ActionSchema(name, params, pre, tuple(adds), tuple(dels))


def _parse_method(items, node) -> MethodSchema:
    name = str(_expect_sym(items[1], "method name"))
    sec = _sections(items, node, 2)
    unknown = set(sec) - {":parameters", ":task", ":subtasks", ":ordered-subtasks", ":tasks",
                          ":ordered-tasks", ":ordering", ":precondition"}
    if unknown:
        raise _err(f"unsupported keys in method {name}: {sorted(unknown)}", node)
    if _conjuncts(sec.get(":precondition", SList())):
        raise _err(f"method {name}: method preconditions are not supported", node)
    params = tuple(_typed_list(sec.get(":parameters", SList()), node, True))
    if ":task" not in sec:
        raise _err(f"method {name} lacks :task", node)
    task, task_args = _task_ref(sec[":task"])
    subtasks, ordering = _network(sec, node)
    return MethodSchema(name, params, task, task_args, tuple(subtasks), tuple(ordering))


def _network(sec: dict, node) -> tuple[list[Subtask], list[Ordering]]:
    plain = sec.get(":subtasks", sec.get(":tasks"))
    ordered = sec.get(":ordered-subtasks", sec.get(":ordered-tasks"))
    if plain is not None and ordered is not None:
        raise _err("both :subtasks and :ordered-subtasks given", node)
    subtasks, ordering = _subtasks(ordered if ordered is not None else (plain or SList()), ordered is not None)
    if ":ordering" in sec:
        ordering += _ordering(sec[":ordering"], {s.label for s in subtasks})
    return subtasks, ordering


def _header(root: SList, kind: str) -> tuple[str, list]:
    if len(root) < 2 or root[0] != "define":
        raise _err("expected (define ...)", root)
    head = _expect_list(root[1], f"({kind} NAME)")
    if len(head) != 2 or head[0] != kind:
        raise _err(f"expected ({kind} NAME)", head)
    return str(head[1]), root[2:]


def parse_domain(text: str) -> DomainAST:
    root = read_sexpr(text)
    name, body = _header(root, "domain")
    types: list[tuple[str, str]] = []
    constants: list[tuple[str, str]] = []
    predicates, tasks, actions, durs, methods = [], [], [], [], []
    for part in body:
        part = _expect_list(part, "domain section")
        if not part:
            raise _err("empty section", part)
        key = part[0]
        if key == ":requirements":
            continue
        if key == ":types":
            types += _typed_list(part[1:], part, False)
        elif key == ":constants":
            constants += _typed_list(part[1:], part, False)
        elif key == ":predicates":
            for p in part[1:]:
                p = _expect_list(p, "predicate declaration")
                predicates.append((str(p[0]), tuple(_typed_list(p[1:], p, True))))
        elif key == ":task":
            sec = _sections(part, part, 2)
            tasks.append((str(part[1]), tuple(_typed_list(sec.get(":parameters", SList()), part, True))))
        elif key == ":action":
            actions.append(_parse_action(part, part))
        elif key == ":durative-action":
            durs.append(_parse_durative(part, part))
        elif key == ":method":
            methods.append(_parse_method(part, part))
        else:
            raise _err(f"unsupported domain section {key}", part)
    domain = DomainAST(
        name, tuple(types), tuple(constants), tuple(predicates), tuple(tasks),
        tuple(actions), tuple(durs), tuple(methods),
    )
    check_domain(domain)
    return domain


def parse_problem(text: str, domain: DomainAST | None = None) -> ProblemAST:
    root = read_sexpr(text)
    name, body = _header(root, "problem")
    dname = ""
    objects: list[tuple[str, str]] = []
    init: list[Atom] = []
    goal: list[Atom] = []
    subtasks: list[Subtask] = []
    ordering: list[Ordering] = []
    for part in body:
        part = _expect_list(part, "problem section")
        key = part[0] if part else None
        if key == ":domain":
            dname = str(part[1])
        elif key == ":requirements":
            continue
        elif key == ":objects":
            objects += _typed_list(part[1:], part, False)
        elif key == ":init":
            init += [_atom(a) for a in part[1:]]
        elif key == ":goal":
            goal += [_atom(a) for a in _conjuncts(part[1])] if len(part) > 1 else []
        elif key == ":htn":
            sec = _sections(part, part, 1)
            unknown = set(sec) - {":parameters", ":subtasks", ":ordered-subtasks", ":tasks",
                                  ":ordered-tasks", ":ordering"}
            if unknown:
                raise _err(f"malformed :htn block: unsupported keys {sorted(unknown)}", part)
            if _typed_list(sec.get(":parameters", SList()), part, True):
                raise _err(":htn parameters are not supported", part)
            subtasks, ordering = _network(sec, part)
        else:
            raise _err(f"unsupported problem section {key}", part)
    problem = ProblemAST(name, dname, tuple(objects), tuple(subtasks), tuple(ordering), tuple(init), tuple(goal))
    if domain is not None:
        check_problem(domain, problem)
    return problem


# checking ---------------------------------------------------------------------------


def _check_atoms(atoms: Iterable[Atom], table: dict, scope: dict[str, str], what: str, where: str):
    for head, args in atoms:
        if head not in table:
            raise HDDLError(f"{where}: undeclared {what} {head!r}")
        if len(table[head]) != len(args):
            raise HDDLError(f"{where}: {what} {head!r} expects {len(table[head])} arguments, got {len(args)}")
        for a in args:
            if a not in scope:
                raise HDDLError(f"{where}: unknown {'variable' if a.startswith('?') else 'object'} {a!r}")


def check_domain(d: DomainAST) -> None:
    parents = d.type_parent
    known_types = set(parents) | set(parents.values()) | {"object"}
    for t, parent in parents.items():
        seen = {t}
        while parent in parents:
            if parent in seen:
                raise HDDLError(f"cyclic type hierarchy at {t!r}")
            seen.add(parent)
            parent = parents[parent]
    constants = dict(d.constants)
    preds = d.predicate_table
    tasks = d.task_table
    for _, params in list(preds.items()) + list(tasks.items()):
        for _, tpe in params:
            if tpe not in known_types:
                raise HDDLError(f"undeclared type {tpe!r}")
    for a in d.actions:
        scope = {**constants, **dict(a.parameters)}
        _check_atoms(a.precondition + a.add + a.delete, preds, scope, "predicate", f"action {a.name}")
    for a in d.durative_actions:
        scope = {**constants, **dict(a.parameters)}
        atoms = a.at_start + a.over_all + a.at_end + a.start_add + a.start_delete + a.end_add + a.end_delete
        _check_atoms(atoms, preds, scope, "predicate", f"durative action {a.name}")
    for m in d.methods:
        scope = {**constants, **dict(m.parameters)}
        _check_atoms([(m.task, m.task_args)], tasks, scope, "task", f"method {m.name}")
        _check_atoms([(s.task, s.args) for s in m.subtasks], tasks, scope, "task", f"method {m.name}")


def check_problem(d: DomainAST, p: ProblemAST) -> None:
    if p.domain and p.domain != d.name:
        raise HDDLError(f"problem {p.name} is for domain {p.domain!r}, not {d.name!r}")
    known_types = set(d.type_parent) | set(d.type_parent.values()) | {"object"}
    for o, t in p.objects:
        if t not in known_types:
            raise HDDLError(f"object {o!r} has undeclared type {t!r}")
    scope = {**dict(d.constants), **dict(p.objects)}
    _check_atoms(p.init, d.predicate_table, scope, "predicate", "init")
    _check_atoms(p.goal, d.predicate_table, scope, "predicate", "goal")
    _check_atoms([(s.task, s.args) for s in p.subtasks], d.task_table, scope, "task", ":htn")


# printing ----------------------------------------------------------------------------------


def _fmt_typed(items: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"{n} - {t}" for n, t in items)


def _fmt_atom(a: Atom) -> str:
    return "(" + " ".join((a[0], *a[1])) + ")"


def _fmt_and(parts: list[str]) -> str:
    return "(and " + " ".join(parts) + ")" if parts else "()"


def _fmt_network(subtasks, ordering) -> str:
    subs = _fmt_and([f"({s.label} ({' '.join((s.task, *s.args))}))" for s in subtasks])
    point = ("start", "end")
    ords = _fmt_and(
        [f"({o.relation} ({point[o.left_point]} {o.left}) ({point[o.right_point]} {o.right}))" for o in ordering]
    )
    return f":subtasks {subs} :ordering {ords}"


def unparse_domain(d: DomainAST) -> str:
    out = [f"(define (domain {d.name})"]
    if d.types:
        out.append(f"  (:types {_fmt_typed(d.types)})")
    if d.constants:
        out.append(f"  (:constants {_fmt_typed(d.constants)})")
    out.append("  (:predicates " + " ".join(f"({n} {_fmt_typed(ps)})".replace(" )", ")") for n, ps in d.predicates) + ")")
    for n, ps in d.tasks:
        out.append(f"  (:task {n} :parameters ({_fmt_typed(ps)}))")
    for a in d.actions:
        eff = [_fmt_atom(x) for x in a.add] + [f"(not {_fmt_atom(x)})" for x in a.delete]
        out.append(
            f"  (:action {a.name} :parameters ({_fmt_typed(a.parameters)})"
            f" :precondition {_fmt_and([_fmt_atom(x) for x in a.precondition])} :effect {_fmt_and(eff)})"
        )
    for a in d.durative_actions:
        cond = (
            [f"(at start {_fmt_atom(x)})" for x in a.at_start]
            + [f"(over all {_fmt_atom(x)})" for x in a.over_all]
            + [f"(at end {_fmt_atom(x)})" for x in a.at_end]
        )
        eff = (
            [f"(at start {_fmt_atom(x)})" for x in a.start_add]
            + [f"(at start (not {_fmt_atom(x)}))" for x in a.start_delete]
            + [f"(at end {_fmt_atom(x)})" for x in a.end_add]
            + [f"(at end (not {_fmt_atom(x)}))" for x in a.end_delete]
        )
        out.append(
            f"  (:durative-action {a.name} :parameters ({_fmt_typed(a.parameters)})"
            f" :duration (= ?duration {a.duration}) :condition {_fmt_and(cond)} :effect {_fmt_and(eff)})"
        )
    for m in d.methods:
        out.append(
            f"  (:method {m.name} :parameters ({_fmt_typed(m.parameters)})"
            f" :task ({' '.join((m.task, *m.task_args))}) {_fmt_network(m.subtasks, m.ordering)})"
        )
    out.append(")")
    return "\n".join(out) + "\n"


def unparse_problem(p: ProblemAST) -> str:
    out = [f"(define (problem {p.name})", f"  (:domain {p.domain})"]
    out.append(f"  (:objects {_fmt_typed(p.objects)})")
    out.append(f"  (:htn :parameters () {_fmt_network(p.subtasks, p.ordering)})")
    out.append("  (:init " + " ".join(_fmt_atom(a) for a in p.init) + ")")
    out.append(f"  (:goal {_fmt_and([_fmt_atom(a) for a in p.goal])})")
    out.append(")")
    return "\n".join(out) + "\n"


# grounding ------------------------------------------------------------------------------


@dataclass
class GroundingTable:
    """Which ground element each (schema, arguments) pair became."""

    entries: dict[tuple[str, tuple[str, ...]], object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)


def objects_by_type(domain: DomainAST, problem: ProblemAST) -> dict[str, list[str]]:
    parents = domain.type_parent
    out: dict[str, list[str]] = {}
    for obj, tpe in list(domain.constants) + list(problem.objects):
        seen = set()
        while tpe not in seen:
            seen.add(tpe)
            if obj not in out.setdefault(tpe, []):
                out[tpe].append(obj)
            if tpe == "object":
                break
            tpe = parents.get(tpe, "object")
    return out


def _bindings(params: Params, objects: dict[str, list[str]]) -> Iterator[dict[str, str]]:
    names = [n for n, _ in params]
    domains = [objects.get(t, []) for _, t in params]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def _ground_atoms(atoms, binding):
    return frozenset(prop(h, *(binding.get(a, a) for a in args)) for h, args in atoms)


def _args(args, binding) -> tuple[str, ...]:
    return tuple(binding.get(a, a) for a in args)


def _constraints(ordering: Iterable[Ordering], labels: list[str]) -> tuple[TemporalConstraint, ...]:
    pos = {l: i for i, l in enumerate(labels)}
    return tuple(
        TemporalConstraint(TimeVar(pos[o.left], o.left_point), o.relation, TimeVar(pos[o.right], o.right_point))
        for o in ordering
    )


def ground(
    domain: DomainAST,
    problem: ProblemAST,
    *,
    prune: bool = False,
    static_filter: bool = True,
    max_elements: int = 200_000,
) -> GroundProblem:
    """Instantiate every schema over type-correct object tuples.

    With ``static_filter``, actions needing a static atom (one no action
    changes) that is false initially are skipped; they can never run.
    Methods mentioning a subtask that nothing can refine are dropped (to a
    fixpoint); the initial network must stay refinable.  With ``prune``,
    actions unreachable under delete relaxation are dropped as well.
    """
    check_problem(domain, problem)
    objects = objects_by_type(domain, problem)
    init = frozenset(prop(h, *args) for h, args in problem.init)
    statics = static_predicates(domain) if static_filter else frozenset()

    def possible(*groups) -> bool:
        return all(p in init for g in groups for p in g if p.predicate in statics)
    budget = [max_elements]

    def spend(n: int = 1) -> None:
        budget[0] -= n
        if budget[0] < 0:
            raise GroundingLimitError(f"grounding exceeds {max_elements} elements")

    table = GroundingTable()
    snaps: dict = {}
    durs: dict = {}
    abstract = set()
    for a in domain.actions:
        for b in _bindings(a.parameters, objects):
            spend()
            args = _args([n for n, _ in a.parameters], b)
            add = _ground_atoms(a.add, b)
            pre = _ground_atoms(a.precondition, b)
            if not possible(pre):
                continue
            act = SnapAction(
                task_name(a.name, *args),
                pre,
                add,
                _ground_atoms(a.delete, b) - add,
            )
            snaps[act.name] = act
            table.entries[(a.name, args)] = act
    for a in domain.durative_actions:
        for b in _bindings(a.parameters, objects):
            spend()
            args = _args([n for n, _ in a.parameters], b)
            name = task_name(a.name, *args)
            sadd, sdel = _ground_atoms(a.start_add, b), _ground_atoms(a.start_delete, b)
            eadd, edel = _ground_atoms(a.end_add, b), _ground_atoms(a.end_delete, b)
            spre, epre, inv = (_ground_atoms(a.at_start, b), _ground_atoms(a.at_end, b),
                               _ground_atoms(a.over_all, b))
            if not possible(spre, epre, inv):
                continue
            act = DurativeAction(
                name,
                SnapAction(start_name(name), spre, sadd, sdel - sadd),
                SnapAction(end_name(name), epre, eadd, edel - eadd),
                inv,
                a.duration,
            )
            durs[name] = act
            table.entries[(a.name, args)] = act
    for t, params in domain.tasks:
        for b in _bindings(params, objects):
            spend()
            name = task_name(t, *_args([n for n, _ in params], b))
            abstract.add(name)
            table.entries[(t, name.args)] = name
    methods: list[Method] = []
    for m in domain.methods:
        labels = [s.label for s in m.subtasks]
        cons = _constraints(m.ordering, labels)
        for b in _bindings(m.parameters, objects):
            spend()
            args = _args([n for n, _ in m.parameters], b)
            head = task_name(m.task, *_args(m.task_args, b))
            subs = tuple(task_name(s.task, *_args(s.args, b)) for s in m.subtasks)
            try:
                method = Method("(" + " ".join((m.name, *args)) + ")", head, subs, cons)
            except ModelError as exc:
                raise HDDLError(str(exc)) from None
            methods.append(method)
            table.entries[(m.name, args)] = method
    goal = frozenset(prop(h, *args) for h, args in problem.goal)
    labels = [s.label for s in problem.subtasks]
    network = TaskNetwork(
        tuple(task_name(s.task, *s.args) for s in problem.subtasks),
        _constraints(problem.ordering, labels),
    )
    if prune:
        snaps, durs = _relaxed_reachable(init, snaps, durs)
    methods = _prune_methods(methods, snaps, durs)
    refinable = set(snaps) | set(durs) | {m.task for m in methods}
    for t in network.tasks:
        if t not in refinable:
            raise HDDLError(f"initial task {t} cannot be refined by any method or action")
    props = set(init) | set(goal)
    for a in snaps.values():
        props |= a.preconditions | a.add_effects | a.delete_effects
    for a in durs.values():
        for s in (a.start, a.end):
            props |= s.preconditions | s.add_effects | s.delete_effects
        props |= a.invariants
    gp = GroundProblem(
        name=problem.name,
        propositions=frozenset(props),
        abstract_tasks=frozenset(abstract),
        durative_actions=durs,
        snap_actions=snaps,
        methods=tuple(methods),
        initial_state=init,
        network=network,
        goal=goal,
        domain_name=domain.name,
    )
    object.__setattr__(gp, "grounding", table)
    return gp


def static_predicates(domain: DomainAST) -> frozenset[str]:
    """Predicates that no action adds or deletes."""
    changed = set()
    for a in domain.actions:
        changed.update(h for h, _ in a.add + a.delete)
    for a in domain.durative_actions:
        changed.update(h for h, _ in a.start_add + a.start_delete + a.end_add + a.end_delete)
    return frozenset(n for n, _ in domain.predicates if n not in changed)


def _prune_methods(methods: list[Method], snaps: dict, durs: dict) -> list[Method]:
    alive = list(methods)
    while True:
        refinable = set(snaps) | set(durs) | {m.task for m in alive}
        kept = [m for m in alive if all(u in refinable for u in m.subtasks)]
        if len(kept) == len(alive):
            return kept
        alive = kept


def _relaxed_reachable(init, snaps: dict, durs: dict):
    facts = set(init)
    live_snaps: dict = {}
    live_durs: dict = {}
    changed = True
    while changed:
        changed = False
        for name, a in snaps.items():
            if name not in live_snaps and a.preconditions <= facts:
                live_snaps[name] = a
                facts |= a.add_effects
                changed = True
        for name, a in durs.items():
            if name in live_durs:
                continue
            if a.compiled_start.preconditions <= facts:
                after = facts | a.start.add_effects
                if a.end.preconditions <= after:
                    live_durs[name] = a
                    facts |= a.start.add_effects | a.end.add_effects
                    changed = True
    return (
        {k: v for k, v in snaps.items() if k in live_snaps},
        {k: v for k, v in durs.items() if k in live_durs},
    )


def load(domain_path, problem_path, **kwargs) -> GroundProblem:
    """Read, check and ground a domain/problem file pair."""
    domain = parse_domain(Path(domain_path).read_text(encoding="utf-8"))
    problem = parse_problem(Path(problem_path).read_text(encoding="utf-8"), domain)
    return ground(domain, problem, **kwargs)
