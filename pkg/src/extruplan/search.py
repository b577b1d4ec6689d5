"""Progression, forward-checking and regression searches over partial structures.

Nodes pop in lexicographic ``(i, r, h)`` order: attempt count, remaining
element count, heuristic tiebreak. Planning happens only when a node is
popped, and every expanded node is re-queued with ``i + 1`` so its sampling
budget keeps growing.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .frame import FrameProblem, printed_nodes
from .geometry import StaticBvh, tool_collides, trajectory_safe
from .heuristics import HeuristicTable
from .kinematics import FreeFlyingExtruder, problem_start
from .motion import SampleBudget, Trajectory, plan_motion, sample_extrusion
from .stiffness import StiffnessChecker
from .validate import Plan

PROGRESSION = "progression"
FORWARD_CHECK = "forward_check"
REGRESSION = "regression"
ALGORITHMS = (PROGRESSION, FORWARD_CHECK, REGRESSION)

SOLVED = "solved"
TIMEOUT = "timeout"
EXHAUSTED = "exhausted"


@dataclass
class SearchStats:
    expansions: int = 0
    backtracks: int = 0
    requeues: int = 0
    pruned: int = 0
    pushes: int = 0
    extrusion_calls: int = 0
    transit_calls: int = 0
    forward_checks: int = 0
    stiffness_checks: int = 0
    cache_hits: int = 0
    min_remaining: int | None = None
    wall_time: float = 0.0

    def to_json(self, timing: bool = True) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "wall_time"}
        if timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class SearchResult:
    status: str
    plan: Plan | None
    stats: SearchStats

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


@dataclass(order=True)
class _Entry:
    key: tuple
    node: SearchNode = field(compare=False)


@dataclass
class SearchNode:
    """Queued search node: state ``(printed, q)``, candidate element and partial plan.

    ``plan`` is a persistent cons list ``(trajectory, rest)``; for progression
    the newest trajectory is at the head, for regression the earliest.
    """

    uid: int
    attempts: int
    remaining: int
    h: float
    printed: frozenset
    q: object
    element: int
    plan: tuple | None

    @property
    def key(self) -> tuple:
        return (self.attempts, self.remaining, self.h)


def _cons_to_list(cons) -> list:
    out = []
    while cons is not None:
        out.append(cons[0])
        cons = cons[1]
    return out


class _Search:
    """Shared machinery: open list, instrumentation and budgets."""

    def __init__(self, problem: FrameProblem, heuristic: HeuristicTable, rng: np.random.Generator,
                 timeout: float | None, max_expansions: int | None, smooth: bool,
                 model, stiff: StiffnessChecker | None, trace: Callable | None, negate: bool):
        self.problem = problem
        self.heuristic = heuristic
        self.rng = rng
        self.smooth = smooth
        self.model = model or FreeFlyingExtruder.for_problem(problem)
        self.stiff = stiff or StiffnessChecker(problem)
        self.bvh = StaticBvh(problem)
        self.trace = trace
        self.sign = -1.0 if negate else 1.0
        self.stats = SearchStats()
        self.open: list[_Entry] = []
        self.counter = itertools.count()
        self.uids = itertools.count()
        self.current: int | None = None
        self.last_remaining: int | None = None
        self.max_expansions = max_expansions
        self.started = time.monotonic()
        self.deadline = None if timeout is None else self.started + timeout

    def push(self, node: SearchNode) -> None:
        heapq.heappush(self.open, _Entry((node.key, next(self.counter)), node))
        self.stats.pushes += 1
        if self.trace:
            self.trace("push", node.uid, node.key)

    def new_node(self, attempts, remaining, printed, q, element, plan) -> SearchNode:
        return SearchNode(next(self.uids), attempts, remaining, self.sign * self.heuristic[element],
                          printed, q, element, plan)

    def requeue(self, node: SearchNode) -> None:
        node = SearchNode(node.uid, node.attempts + 1, node.remaining, node.h, node.printed, node.q,
                          node.element, node.plan)
        self.stats.requeues += 1
        self.push(node)

    def pop(self) -> SearchNode | None:
        if not self.open:
            return None
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise TimeoutError
        if self.max_expansions is not None and self.stats.expansions >= self.max_expansions:
            raise TimeoutError
        node = heapq.heappop(self.open).node
        if self.last_remaining is not None and node.remaining > self.last_remaining:
            self.stats.backtracks += 1
        self.last_remaining = node.remaining
        self.current = node.uid
        if self.trace:
            self.trace("pop", node.uid, node.key)
        return node

    def is_stiff(self, printed: frozenset) -> bool:
        return self.stiff(printed)

    def sample_extrusion(self, e: int, printed: frozenset, attempts: int) -> Trajectory | None:
        self.stats.extrusion_calls += 1
        if self.trace:
            self.trace("extrusion", self.current, e)
        return sample_extrusion(self.problem, self.bvh, self.model, e, printed, SampleBudget(attempts),
                                self.rng, self.deadline)

    def plan_motion(self, q_start, q_goal, printed: frozenset, attempts: int) -> Trajectory | None:
        self.stats.transit_calls += 1
        if self.trace:
            self.trace("transit", self.current, None)
        return plan_motion(self.problem, self.bvh, self.model, q_start, q_goal, printed,
                           SampleBudget(attempts), self.rng, smooth=self.smooth, deadline=self.deadline)

    def note_depth(self, remaining: int) -> None:
        if self.stats.min_remaining is None or remaining < self.stats.min_remaining:
            self.stats.min_remaining = remaining

    def finish(self, status: str, plan: Plan | None) -> SearchResult:
        self.stats.stiffness_checks = self.stiff.checks
        self.stats.cache_hits = self.stiff.hits
        self.stats.wall_time = time.monotonic() - self.started
        return SearchResult(status, plan, self.stats)


def extrusion_safe(problem: FrameProblem, bvh: StaticBvh | None, trajectory: Trajectory, printed) -> bool:
    """Whether a previously sampled extrusion is still usable on top of ``printed``."""
    printed = frozenset(printed)
    e = trajectory.directed.element
    if trajectory.directed.start not in printed_nodes(problem, printed):
        return False
    if not trajectory_safe(problem, bvh, trajectory, printed, ignore=e):
        return False
    if tool_collides(problem, bvh, trajectory.start, printed):
        return False
    return not tool_collides(problem, bvh, trajectory.end, printed | {e})


def forward_check(problem: FrameProblem, bvh: StaticBvh | None, model, printed, i, cache: dict,
                  rng: np.random.Generator, deadline: float | None = None, on_sample: Callable | None = None) -> bool:
    """One-step lookahead: every printable element must still admit a safe extrusion.

    ``cache`` maps element ids to previously found trajectories and grows in place.
    """
    printed = frozenset(printed)
    nodes = printed_nodes(problem, printed)
    for e, (a, b) in enumerate(problem.elements):
        if e in printed or (a not in nodes and b not in nodes):
            continue
        if any(extrusion_safe(problem, bvh, t, printed) for t in cache.get(e, ())):
            continue
        if on_sample:
            on_sample(e)
        trajectory = sample_extrusion(problem, bvh, model, e, printed, SampleBudget(i) if isinstance(i, int) else i,
                                      rng, deadline)
        if trajectory is None:
            return False
        cache.setdefault(e, []).append(trajectory)
    return True


def progression(problem: FrameProblem, heuristic: HeuristicTable, rng: np.random.Generator, *,
                timeout: float | None = None, max_expansions: int | None = None, smooth: bool = True,
                use_forward_check: bool = False, model=None, stiff: StiffnessChecker | None = None,
                trace: Callable | None = None) -> SearchResult:
    """Forward greedy search from the empty structure."""
    search = _Search(problem, heuristic, rng, timeout, max_expansions, smooth, model, stiff, trace, negate=False)
    q0 = problem_start(problem)
    everything = problem.all_elements
    m = problem.num_elements
    for e in range(m):
        if set(problem.elements[e]) & problem.ground:
            search.push(search.new_node(0, m, frozenset(), q0, e, None))
    cache: dict = {}
    try:
        while True:
            node = search.pop()
            if node is None:
                return search.finish(EXHAUSTED, None)
            after = node.printed | {node.element}
            if not search.is_stiff(after):
                search.stats.pruned += 1
                continue
            search.stats.expansions += 1
            extrusion = None
            passed = True
            if use_forward_check:
                search.stats.forward_checks += 1
                passed = forward_check(problem, search.bvh, search.model, after, SampleBudget(node.attempts),
                                       cache, rng, search.deadline,
                                       on_sample=lambda e: _count_lookahead(search, e))
            if passed:
                extrusion = search.sample_extrusion(node.element, node.printed, node.attempts)
            if extrusion is not None:
                transit = search.plan_motion(node.q, extrusion.start, node.printed, node.attempts)
                if transit is not None:
                    plan = (extrusion, (transit, node.plan))
                    search.note_depth(node.remaining - 1)
                    if after == everything:
                        home = search.plan_motion(extrusion.end, q0, everything, node.attempts)
                        if home is not None:
                            trajectories = _cons_to_list((home, plan))[::-1]
                            return search.finish(SOLVED, Plan(tuple(trajectories)))
                    for e in range(m):
                        if e not in after:
                            search.push(search.new_node(0, node.remaining - 1, after, extrusion.end, e, plan))
            search.requeue(node)
    except TimeoutError:
        return search.finish(TIMEOUT, None)


def _count_lookahead(search: _Search, e: int) -> None:
    search.stats.extrusion_calls += 1
    if search.trace:
        search.trace("extrusion", search.current, e)


def regression(problem: FrameProblem, heuristic: HeuristicTable, rng: np.random.Generator, *,
               timeout: float | None = None, max_expansions: int | None = None, smooth: bool = True,
               model=None, stiff: StiffnessChecker | None = None, trace: Callable | None = None) -> SearchResult:
    """Backward greedy search that removes elements from the finished structure."""
    search = _Search(problem, heuristic, rng, timeout, max_expansions, smooth, model, stiff, trace, negate=True)
    q0 = problem_start(problem)
    everything = problem.all_elements
    m = problem.num_elements
    for e in range(m):
        search.push(search.new_node(0, m, everything, q0, e, None))
    try:
        while True:
            node = search.pop()
            if node is None:
                return search.finish(EXHAUSTED, None)
            before = node.printed - {node.element}
            if not search.is_stiff(before):
                search.stats.pruned += 1
                continue
            search.stats.expansions += 1
            extrusion = search.sample_extrusion(node.element, before, node.attempts)
            if extrusion is not None:
                transit = search.plan_motion(extrusion.end, node.q, node.printed, node.attempts)
                if transit is not None:
                    plan = (extrusion, (transit, node.plan))
                    search.note_depth(node.remaining - 1)
                    if not before:
                        first = search.plan_motion(q0, extrusion.start, before, node.attempts)
                        if first is not None:
                            return search.finish(SOLVED, Plan(tuple([first] + _cons_to_list(plan))))
                    for e in sorted(before):
                        search.push(search.new_node(0, node.remaining - 1, before, extrusion.start, e, plan))
            search.requeue(node)
    except TimeoutError:
        return search.finish(TIMEOUT, None)


def plan(problem: FrameProblem, algorithm: str, heuristic: HeuristicTable, rng: np.random.Generator,
         **options) -> SearchResult:
    if algorithm == PROGRESSION:
        return progression(problem, heuristic, rng, **options)
    if algorithm == FORWARD_CHECK:
        return progression(problem, heuristic, rng, use_forward_check=True, **options)
    if algorithm == REGRESSION:
        return regression(problem, heuristic, rng, **options)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")


# -- simplified models ------------------------------------------------------------

@dataclass(frozen=True)
class GeometryOnlyInstance:
    """Candidate extrusions per element, each described by the elements it collides with.

    ``trajectories[e][k]`` is the set of elements whose presence makes the
    ``k``-th candidate for ``e`` unsafe.
    """

    trajectories: tuple[tuple[frozenset, ...], ...]

    @property
    def num_elements(self) -> int:
        return len(self.trajectories)

    @property
    def num_trajectories(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def safe(self, e: int, k: int, present) -> bool:
        return not (self.trajectories[e][k] & frozenset(present))


@dataclass
class GeometryOnlyResult:
    order: list[int] | None
    assignment: dict[int, int] | None
    operations: int
    expansions: int
    backtracks: int

    @property
    def solved(self) -> bool:
        return self.order is not None


def regression_geometry_only(instance: GeometryOnlyInstance, rng: np.random.Generator) -> GeometryOnlyResult:
    """Regression with stiffness and transit trivial and a fixed candidate trajectory set.

    Each removal picks a safe candidate among the element's trajectories in a
    random order. A deterministic model gains nothing from re-attempts, so
    failed nodes are not re-queued and failure means the open list ran dry.
    A candidate's safety is decided by hashed membership tests over the
    smaller of its collision set and the remaining structure, so a rejected
    candidate costs its collision count rather than the structure size.
    ``operations`` counts those membership tests and queue pushes.
    """
    m = instance.num_elements
    operations = 0
    expansions = 0
    backtracks = 0
    counter = itertools.count()
    everything = frozenset(range(m))
    open_list = [((m, 0.0), next(counter), everything, e, None) for e in range(m)]
    heapq.heapify(open_list)
    operations += m
    last_remaining = None
    while open_list:
        (r, _), _, present, e, plan = heapq.heappop(open_list)
        if last_remaining is not None and r > last_remaining:
            backtracks += 1
        last_remaining = r
        before = present - {e}
        chosen = None
        for k in rng.permutation(len(instance.trajectories[e])):
            blockers = instance.trajectories[e][k]
            probe, against = (blockers, before) if len(blockers) <= len(before) else (before, blockers)
            hit = False
            for other in probe:
                operations += 1
                if other in against:
                    hit = True
                    break
            if not hit:
                chosen = int(k)
                break
        if chosen is None:
            continue
        expansions += 1
        plan = ((e, chosen), plan)
        if not before:
            steps = _cons_to_list(plan)
            return GeometryOnlyResult([s[0] for s in steps], dict(steps), operations, expansions, backtracks)
        for nxt in sorted(before):
            heapq.heappush(open_list, ((r - 1, 0.0), next(counter), before, nxt, plan))
            operations += 1
    return GeometryOnlyResult(None, None, operations, expansions, backtracks)


@dataclass
class StiffnessOnlyResult:
    order: list[int] | None
    status: str
    expansions: int
    backtracks: int


def regression_stiffness_only(problem: FrameProblem, heuristic: HeuristicTable, *,
                              max_expansions: int | None = None, timeout: float | None = None,
                              stiff: StiffnessChecker | None = None) -> StiffnessOnlyResult:
    """Regression with every geometric and motion check trivially true.

    Sampling cannot fail, so no node is re-queued; the search is exhaustive
    and stops at ``max_expansions`` or ``timeout``.
    """
    stiff = stiff or StiffnessChecker(problem)
    deadline = None if timeout is None else time.monotonic() + timeout
    m = problem.num_elements
    counter = itertools.count()
    everything = problem.all_elements
    open_list = [((m, -heuristic[e]), next(counter), everything, e, None) for e in range(m)]
    heapq.heapify(open_list)
    expansions = 0
    backtracks = 0
    last_remaining = None
    while open_list:
        if deadline is not None and time.monotonic() > deadline:
            return StiffnessOnlyResult(None, TIMEOUT, expansions, backtracks)
        if max_expansions is not None and expansions >= max_expansions:
            return StiffnessOnlyResult(None, TIMEOUT, expansions, backtracks)
        (r, _), _, present, e, plan = heapq.heappop(open_list)
        if last_remaining is not None and r > last_remaining:
            backtracks += 1
        last_remaining = r
        before = present - {e}
        if not stiff(before):
            continue
        if not set(problem.elements[e]) & printed_nodes(problem, before):
            continue
        expansions += 1
        plan = (e, plan)
        if not before:
            return StiffnessOnlyResult(_cons_to_list(plan), SOLVED, expansions, backtracks)
        for nxt in sorted(before):
            heapq.heappush(open_list, ((r - 1, -heuristic[nxt]), next(counter), before, nxt, plan))
    return StiffnessOnlyResult(None, EXHAUSTED, expansions, backtracks)
