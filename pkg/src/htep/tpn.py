"""Temporal point network.

Qualitative part: point-algebra constraints over time variables, checked
for consistency by strongly connected components of the ``<=``/``<`` graph
(an SCC holding a strict edge, or a ``!=`` pair inside one class, is a
contradiction).  Small networks additionally keep a bitset transitive
closure that children extend incrementally, so "is ``a < b`` still
possible" is a constant-time question during search.

Metric part: ``end - start = d`` equalities.  Together with the qualitative
edges they form a simple temporal network solved by shortest paths, with
``<`` realised as a gap of at least ``epsilon``.
"""
from __future__ import annotations

import gc
import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .model import GOAL_SYMBOL, INIT_SYMBOL, START, TemporalConstraint, TimeVar

log = logging.getLogger(__name__)

DEFAULT_EPSILON = Fraction(1, 1000)
# networks above this many variables skip the closure and answer queries by DFS
CLOSURE_LIMIT = 4096

_SWAP = {">": "<", ">=": "<="}


def normalize(c: TemporalConstraint) -> TemporalConstraint:
    """Rewrite ``>``/``>=`` as ``<``/``<=`` with swapped endpoints."""
    if c.relation in _SWAP:
        return TemporalConstraint(c.right, _SWAP[c.relation], c.left, None)
    return c


class PointNetwork:
    """Persistent point-algebra network with metric duration equalities.

    Instances are never mutated; ``add`` returns a new network that shares
    unchanged parts with its parent.
    """

    __slots__ = (
        "_index", "_vars", "_succ", "_neq", "_durations", "_constraints",
        "_reach", "_sreach", "_consistent",
    )

    def __init__(self):
        self._index: dict[TimeVar, int] = {}
        self._vars: tuple[TimeVar, ...] = ()
        self._succ: list[tuple[tuple[int, bool], ...]] = []
        self._neq: tuple[tuple[int, int], ...] = ()
        self._durations: tuple[tuple[int, int, Fraction], ...] = ()
        self._constraints: tuple[TemporalConstraint, ...] = ()
        self._reach: list[int] | None = []
        self._sreach: list[int] | None = []
        self._consistent: bool | None = True

    # construction -------------------------------------------------------

    @classmethod
    def from_constraints(
        cls, constraints: Iterable[TemporalConstraint], variables: Iterable[TimeVar] = ()
    ) -> "PointNetwork":
        """Bulk constructor, linear in the number of constraints.

        No closure is built; it is created lazily if the network is small
        and an incremental query is made.
        """
        # the build allocates many small acyclic containers; collecting
        # during it only costs time
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            return cls._build(constraints, variables)
        finally:
            if was_enabled:
                gc.enable()

    @classmethod
    def _build(cls, constraints, variables) -> "PointNetwork":
        net = cls()
        index: dict[TimeVar, int] = {}
        succ: list[list[tuple[int, bool]]] = []
        for v in variables:
            if v not in index:
                index[v] = len(succ)
                succ.append([])
        neq, durations, kept = [], [], []
        for c in constraints:
            kept.append(c)
            left, rel, right, offset = c
            a = index.get(left)
            if a is None:
                a = index[left] = len(succ)
                succ.append([])
            b = index.get(right)
            if b is None:
                b = index[right] = len(succ)
                succ.append([])
            if offset is not None:
                durations.append((a, b, offset))
            elif rel == "<":
                succ[a].append((b, True))
            elif rel == "<=":
                succ[a].append((b, False))
            elif rel == ">":
                succ[b].append((a, True))
            elif rel == ">=":
                succ[b].append((a, False))
            elif rel == "=":
                succ[a].append((b, False))
                succ[b].append((a, False))
            else:
                neq.append((a, b))
        net._index = index
        net._vars = tuple(index)
        net._succ = [tuple(s) for s in succ]
        net._neq = tuple(neq)
        net._durations = tuple(durations)
        net._constraints = tuple(kept)
        net._reach = None
        net._sreach = None
        net._consistent = None
        return net

    def _copy(self) -> "PointNetwork":
        net = PointNetwork.__new__(PointNetwork)
        net._index = self._index
        net._vars = self._vars
        net._succ = self._succ
        net._neq = self._neq
        net._durations = self._durations
        net._constraints = self._constraints
        net._reach = self._reach
        net._sreach = self._sreach
        net._consistent = self._consistent
        return net

    def with_variables(self, variables: Iterable[TimeVar]) -> "PointNetwork":
        new = [v for v in dict.fromkeys(variables) if v not in self._index]
        if not new:
            return self
        net = self._copy()
        net._index = dict(self._index)
        for v in new:
            net._index[v] = len(net._index)
        net._vars = self._vars + tuple(new)
        net._succ = self._succ + [()] * len(new)
        if self._reach is not None:
            base = len(self._vars)
            net._reach = self._reach + [1 << (base + k) for k in range(len(new))]
            net._sreach = self._sreach + [0] * len(new)
        return net

    def add(self, *constraints: TemporalConstraint) -> "PointNetwork":
        """Return a network extended with ``constraints``."""
        net = self.with_variables(v for c in constraints for v in (c.left, c.right))
        if net is self:
            net = self._copy()
        if net._reach is None and len(net._vars) <= CLOSURE_LIMIT and net.consistent():
            net._build_closure()
        net._constraints = self._constraints + constraints
        succ = None
        for c in constraints:
            a, b = net._index[c.left], net._index[c.right]
            if c.offset is not None:
                net._durations = net._durations + ((a, b, c.offset),)
                continue
            c = normalize(c)
            a, b = net._index[c.left], net._index[c.right]
            if succ is None:
                succ = net._succ = list(net._succ)
            if c.relation == "!=":
                net._neq = net._neq + ((a, b),)
                if net._consistent and net._reach is not None and net._mutual(a, b):
                    net._consistent = False
                elif net._reach is None:
                    net._consistent = None
                continue
            edges = [(a, b, c.relation == "<")]
            if c.relation == "=":
                edges.append((b, a, False))
            for u, v, strict in edges:
                succ[u] = succ[u] + ((v, strict),)
                if net._reach is not None:
                    net._close_edge(u, v, strict)
                else:
                    net._consistent = None
        return net

    def _build_closure(self) -> None:
        n = len(self._vars)
        comp = _tarjan(n, self._succ)
        ncomp = max(comp, default=-1) + 1
        members: list[list[int]] = [[] for _ in range(ncomp)]
        for i, c in enumerate(comp):
            members[c].append(i)
        creach = [0] * ncomp
        csreach = [0] * ncomp
        # Tarjan numbers sink components first
        for c in range(ncomp):
            r = s = 0
            for u in members[c]:
                r |= 1 << u
            for u in members[c]:
                for v, strict in self._succ[u]:
                    cv = comp[v]
                    if cv == c:
                        continue
                    r |= creach[cv]
                    s |= creach[cv] if strict else csreach[cv]
            creach[c], csreach[c] = r, s
        self._reach = [creach[comp[i]] for i in range(n)]
        self._sreach = [csreach[comp[i]] for i in range(n)]

    def _close_edge(self, u: int, v: int, strict: bool) -> None:
        reach, sreach = list(self._reach), list(self._sreach)
        rv, sv = reach[v], sreach[v]
        bit_u = 1 << u
        cycle = bool(rv & bit_u)
        for x in range(len(reach)):
            rx = reach[x]
            if rx & bit_u:
                reach[x] = rx | rv
                if strict or sreach[x] & bit_u:
                    sreach[x] |= rv
                else:
                    sreach[x] |= sv
        self._reach, self._sreach = reach, sreach
        if cycle and self._consistent is not False:
            ok = not any(sreach[x] >> x & 1 for x in range(len(reach)))
            self._consistent = ok and not any(self._mutual(p, q) for p, q in self._neq)

    def _mutual(self, a: int, b: int) -> bool:
        r = self._reach
        return bool(r[a] >> b & 1 and r[b] >> a & 1)

    # queries ------------------------------------------------------------

    @property
    def variables(self) -> tuple[TimeVar, ...]:
        return self._vars

    @property
    def constraints(self) -> tuple[TemporalConstraint, ...]:
        return self._constraints

    def __contains__(self, var: TimeVar) -> bool:
        return var in self._index

    def __len__(self) -> int:
        return len(self._vars)

    def consistent(self) -> bool:
        """SCC-based qualitative consistency (metric offsets ignored)."""
        if self._consistent is None:
            self._consistent = _scc_consistent(len(self._vars), self._succ, self._neq)
        return self._consistent

    def _ensure_closure(self) -> bool:
        if self._reach is None and len(self._vars) <= CLOSURE_LIMIT and self.consistent():
            self._build_closure()
        return self._reach is not None

    def reaches(self, a: TimeVar, b: TimeVar) -> bool:
        """True iff ``a <= b`` is entailed by a chain of constraints."""
        i, j = self._index[a], self._index[b]
        if self._ensure_closure():
            return bool(self._reach[i] >> j & 1)
        return _dfs_reaches(self._succ, i, j)

    def entails_before(self, a: TimeVar, b: TimeVar) -> bool:
        """True iff ``a < b`` is entailed."""
        i, j = self._index[a], self._index[b]
        if self._ensure_closure():
            return bool(self._sreach[i] >> j & 1)
        return _dfs_reaches(self._succ, i, j, need_strict=True)

    def consistent_with(self, extra: TemporalConstraint) -> bool:
        """Whether adding ``extra`` keeps the network consistent."""
        if extra.left not in self._index or extra.right not in self._index:
            raise KeyError(f"unknown time variable in {extra}")
        if not self.consistent():
            return False
        if extra.offset is not None:
            return True
        c = normalize(extra)
        if c.relation == "<":
            return not self.reaches(c.right, c.left)
        if c.relation == "!=":
            return c.left != c.right and not (
                self.reaches(c.left, c.right) and self.reaches(c.right, c.left)
            )
        if c.relation == "<=" and not self._neq:
            return not self.entails_before(c.right, c.left)
        return self.add(c).consistent()

    def can_precede(self, a: TimeVar, b: TimeVar) -> bool:
        """``a < b`` is consistent with the network."""
        return not self.reaches(b, a)


def _tarjan(n: int, succ) -> list[int]:
    """Iterative Tarjan; returns component ids in reverse topological order."""
    index = [-1] * n
    low = [0] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        work = [(root, iter(succ[root]))]
        while work:
            node, edges = work[-1]
            for w, _ in edges:
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    work.append((w, iter(succ[w])))
                    break
                # comp[w] == -1 means w is still on the stack
                if comp[w] == -1 and index[w] < low[node]:
                    low[node] = index[w]
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    if low[node] < low[parent]:
                        low[parent] = low[node]
                if low[node] == index[node]:
                    while True:
                        w = stack.pop()
                        comp[w] = ncomp
                        if w == node:
                            break
                    ncomp += 1
    return comp


def _acyclic(n: int, succ) -> bool:
    indeg = [0] * n
    for edges in succ:
        for w, _ in edges:
            indeg[w] += 1
    ready = [u for u in range(n) if not indeg[u]]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for w, _ in succ[u]:
            indeg[w] -= 1
            if not indeg[w]:
                ready.append(w)
    return seen == n


def _scc_consistent(n: int, succ, neq) -> bool:
    if _acyclic(n, succ):
        # every component is a single point
        return all(a != b for a, b in neq)
    comp = _tarjan(n, succ)
    for u in range(n):
        cu = comp[u]
        for v, strict in succ[u]:
            if strict and comp[v] == cu:
                return False
    return all(comp[a] != comp[b] for a, b in neq)


def _dfs_reaches(succ, src: int, dst: int, need_strict: bool = False) -> bool:
    # states: (node, seen_strict)
    seen = {(src, False)}
    todo = [(src, False)]
    while todo:
        node, strict = todo.pop()
        if node == dst and (strict or not need_strict):
            return True
        for w, s in succ[node]:
            state = (w, strict or s)
            if state not in seen:
                seen.add(state)
                todo.append(state)
    return False


def consistent(network: PointNetwork) -> bool:
    return network.consistent()


def consistent_with(network: PointNetwork, extra: TemporalConstraint) -> bool:
    return network.consistent_with(extra)


# metric solving ------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    assignment: Mapping[TimeVar, Fraction]
    epsilon: Fraction = DEFAULT_EPSILON

    @property
    def makespan(self) -> Fraction:
        return makespan(self)

    def __getitem__(self, var: TimeVar) -> Fraction:
        return self.assignment[var]


def makespan(schedule: Schedule) -> Fraction:
    """Latest scheduled point (goal sentinel excluded) minus the origin."""
    times = [t for v, t in schedule.assignment.items() if v.owner != GOAL_SYMBOL]
    if not times:
        return Fraction(0)
    origin = schedule.assignment.get(TimeVar(INIT_SYMBOL, START), Fraction(0))
    return max(times) - origin


def solve_metric(
    network: PointNetwork,
    epsilon: Fraction = DEFAULT_EPSILON,
    max_branches: int = 4096,
) -> Schedule | None:
    """Earliest-time schedule with minimal makespan, or None if infeasible.

    Every variable is kept at or after time 0; the initial sentinel, when
    present, is pinned to 0.  ``!=`` constraints not settled by the
    qualitative classes are resolved lazily: only pairs that collide in the
    earliest schedule are branched on.
    """
    epsilon = Fraction(epsilon)
    if not network.consistent():
        return None
    best: list = [None, None]
    budget = [max_branches]
    _branch(network, epsilon, best, budget)
    return best[0]


def _branch(network: PointNetwork, epsilon: Fraction, best: list, budget: list) -> None:
    budget[0] -= 1
    times = _earliest(network, epsilon)
    if times is None:
        return
    vars_ = network.variables
    for a, b in network._neq:
        if times[a] == times[b]:
            if budget[0] <= 0:
                log.warning("!= branching budget exhausted")
                return
            va, vb = vars_[a], vars_[b]
            for lo, hi in ((va, vb), (vb, va)):
                c = TemporalConstraint(lo, "<", hi)
                if network.consistent_with(c):
                    _branch(network.add(c), epsilon, best, budget)
            return
    schedule = Schedule(dict(zip(vars_, times)), epsilon)
    span = schedule.makespan
    if best[0] is None or span < best[1]:
        best[0], best[1] = schedule, span


def _earliest(network: PointNetwork, epsilon: Fraction) -> list[Fraction] | None:
    """Earliest times via Bellman-Ford (SPFA) on integer-scaled weights."""
    n = len(network.variables)
    scale = epsilon.denominator
    for _, _, d in network._durations:
        scale = scale * d.denominator // math.gcd(scale, d.denominator)
    eps = int(epsilon * scale)
    zero = n  # virtual origin
    # reversed difference graph: constraint x_j - x_i <= w  becomes  j -> i (w)
    radj: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
    for u, edges in enumerate(network._succ):
        for v, strict in edges:
            # u <= v  : x_u - x_v <= 0 (or -eps): edge v->u weight; reversed u->v
            radj[u].append((v, -eps if strict else 0))
    for e, s, d in network._durations:
        w = int(d * scale)
        # x_e - x_s <= w ; x_s - x_e <= -w
        radj[e].append((s, w))
        radj[s].append((e, -w))
    for x in range(n):
        # x_zero - x <= 0
        radj[zero].append((x, 0))
    init = network._index.get(TimeVar(INIT_SYMBOL, START))
    if init is not None:
        # x_init - x_zero <= 0
        radj[init].append((zero, 0))
    dist = _spfa(radj, zero)
    if dist is None:
        return None
    return [Fraction(-dist[x], scale) for x in range(n)]


def _spfa(adj: list[list[tuple[int, int]]], source: int) -> list[int] | None:
    n = len(adj)
    inf = float("inf")
    dist: list = [inf] * n
    dist[source] = 0
    count = [0] * n
    queue = deque([source])
    queued = [False] * n
    queued[source] = True
    while queue:
        u = queue.popleft()
        queued[u] = False
        du = dist[u]
        for v, w in adj[u]:
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                if not queued[v]:
                    count[v] += 1
                    if count[v] > n:
                        return None
                    queued[v] = True
                    queue.append(v)
    return dist
