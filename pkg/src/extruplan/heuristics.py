"""Element tiebreak heuristics and the robot-free stiffness sequencer."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .frame import FrameProblem, printable_elements
from .stiffness import StiffnessChecker

EUCLIDEAN = "euclidean"
GRAPH = "graph"
RANDOM = "random"
STIFFPLAN = "stiffplan"
KINDS = (RANDOM, EUCLIDEAN, GRAPH, STIFFPLAN)


class InfeasibleError(RuntimeError):
    """No stiffness-feasible sequence exists for the problem."""


@dataclass(frozen=True)
class HeuristicTable:
    kind: str
    values: tuple[float, ...]

    def __getitem__(self, e: int) -> float:
        return self.values[e]

    def __len__(self) -> int:
        return len(self.values)

    def to_json(self) -> dict:
        return {"kind": self.kind, "values": list(self.values)}


def euclidean_dist(problem: FrameProblem) -> HeuristicTable:
    """Height of each element's midpoint above the ground plane."""
    values = []
    for a, b in problem.elements:
        mid = (problem.nodes[a] + problem.nodes[b]) / 2.0
        values.append(float(mid[2]))
    return HeuristicTable(EUCLIDEAN, tuple(values))


def node_ground_distances(problem: FrameProblem) -> np.ndarray:
    """Shortest path length along elements from the nearest ground node."""
    ends = np.array(problem.elements, dtype=int)
    weights = np.array([problem.element_length(e) for e in range(problem.num_elements)])
    n = problem.num_nodes
    graph = sp.csr_matrix((weights, (ends[:, 0], ends[:, 1])), shape=(n, n))
    return dijkstra(graph, directed=False, indices=sorted(problem.ground), min_only=True)


def graph_dist(problem: FrameProblem) -> HeuristicTable:
    """Graph distance from the ground to each element midpoint via its nearer endpoint."""
    dist = node_ground_distances(problem)
    values = []
    for e, (a, b) in enumerate(problem.elements):
        half = problem.element_length(e) / 2.0
        values.append(float(min(dist[a] + half, dist[b] + half)))
    return HeuristicTable(GRAPH, tuple(values))


def random_heuristic(problem: FrameProblem, rng: np.random.Generator) -> HeuristicTable:
    return HeuristicTable(RANDOM, tuple(float(v) for v in rng.random(problem.num_elements)))


@dataclass
class StiffnessPlanStats:
    expansions: int = 0
    pruned: int = 0
    pushes: int = 0


def plan_stiffness(problem: FrameProblem, stiff: StiffnessChecker | None = None,
                   heuristic: HeuristicTable | None = None, timeout: float | None = None,
                   stats: StiffnessPlanStats | None = None,
                   max_expansions: int | None = None) -> list[int] | None:
    """Greedy forward search over printed sets under the stiffness constraint only.

    Returns the element order, or ``None`` when no order exists. The search
    is exhaustive; a structure already expanded is not expanded again, which
    leaves the result unchanged. Exceeding ``timeout`` or ``max_expansions``
    raises ``TimeoutError``.
    """
    stiff = stiff or StiffnessChecker(problem)
    heuristic = heuristic or euclidean_dist(problem)
    stats = stats if stats is not None else StiffnessPlanStats()
    deadline = None if timeout is None else time.monotonic() + timeout
    counter = itertools.count()
    m = problem.num_elements
    everything = problem.all_elements
    empty = frozenset()
    open_list = [((m, heuristic[e]), next(counter), empty, e, ()) for e in sorted(printable_elements(problem, empty))]
    heapq.heapify(open_list)
    expanded = set()
    while open_list:
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutError("stiffness planning timed out")
        if max_expansions is not None and stats.expansions >= max_expansions:
            raise TimeoutError("stiffness planning exceeded its expansion budget")
        (r, _), _, printed, e, order = heapq.heappop(open_list)
        after = printed | {e}
        if after in expanded:
            continue
        if not stiff(after):
            stats.pruned += 1
            continue
        expanded.add(after)
        stats.expansions += 1
        order = order + (e,)
        if after == everything:
            return list(order)
        for nxt in sorted(printable_elements(problem, after)):
            heapq.heappush(open_list, ((r - 1, heuristic[nxt]), next(counter), after, nxt, order))
            stats.pushes += 1
    return None


def stiffplan_heuristic(problem: FrameProblem, stiff: StiffnessChecker | None = None,
                        timeout: float | None = None) -> HeuristicTable:
    order = plan_stiffness(problem, stiff, timeout=timeout)
    if order is None:
        raise InfeasibleError("no stiffness-feasible extrusion sequence exists")
    values = [0.0] * problem.num_elements
    for j, e in enumerate(order):
        values[e] = float(j)
    return HeuristicTable(STIFFPLAN, tuple(values))


def make_heuristic(problem: FrameProblem, kind: str, rng: np.random.Generator | None = None,
                   stiff: StiffnessChecker | None = None, timeout: float | None = None) -> HeuristicTable:
    if kind == EUCLIDEAN:
        return euclidean_dist(problem)
    if kind == GRAPH:
        return graph_dist(problem)
    if kind == RANDOM:
        return random_heuristic(problem, rng if rng is not None else np.random.default_rng(0))
    if kind == STIFFPLAN:
        return stiffplan_heuristic(problem, stiff, timeout)
    raise ValueError(f"unknown heuristic {kind!r}; expected one of {', '.join(KINDS)}")
