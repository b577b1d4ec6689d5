"""Extrusion sampling, constrained extrusion paths and RRT-Connect transit planning.

Every planner takes an attempt index ``i``; its sample budget grows
geometrically with ``i`` and planners return ``None`` when the budget runs out.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .frame import DirectedElement, FrameProblem, printed_nodes
from .geometry import (StaticBvh, retraction_point, sample_orientation,
                       tool_collides, trajectory_safe)
from .kinematics import Configuration

TRANSIT = "transit"
EXTRUSION = "extrusion"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-linear path through configurations.

    Extrusion trajectories hold four waypoints: approach retraction, start
    node, end node, departing retraction, all at one orientation.
    """

    waypoints: tuple[Configuration, ...]
    kind: str = TRANSIT
    directed: DirectedElement | None = None
    orientation: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory needs at least two waypoints")

    @property
    def start(self) -> Configuration:
        return self.waypoints[0]

    @property
    def end(self) -> Configuration:
        return self.waypoints[-1]

    @property
    def element(self) -> int | None:
        return None if self.directed is None else self.directed.element

    def length(self, model) -> float:
        return sum(model.distance(a, b) for a, b in zip(self.waypoints[:-1], self.waypoints[1:]))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "waypoints": [q.to_list() for q in self.waypoints]}
        if self.directed is not None:
            out["element"] = self.directed.element
            out["start"] = self.directed.start
            out["end"] = self.directed.end
            out["orientation"] = [float(v) for v in self.orientation]
        return out

    @classmethod
    def from_json(cls, data: dict) -> Trajectory:
        directed = None
        orientation = None
        if data.get("kind") == EXTRUSION:
            directed = DirectedElement(int(data["element"]), int(data["start"]), int(data["end"]))
            orientation = np.array(data["orientation"], dtype=float)
        return cls(tuple(Configuration.from_list(w) for w in data["waypoints"]), data.get("kind", TRANSIT),
                   directed, orientation)


@dataclass(frozen=True)
class SampleBudget:
    """Sample counts for attempt ``i``; all grow without bound in ``i``."""

    attempt: int = 0
    orientation_base: int = 8
    ik_samples: int = 4
    rrt_base: int = 200

    @property
    def orientation_samples(self) -> int:
        return self.orientation_base * 2 ** self.attempt

    @property
    def rrt_iterations(self) -> int:
        return self.rrt_base * 2 ** self.attempt


def _budget(i) -> SampleBudget:
    return i if isinstance(i, SampleBudget) else SampleBudget(int(i))


def _expired(deadline: float | None) -> bool:
    return deadline is not None and time.monotonic() > deadline


def _ik(model, position, orientation, budget: SampleBudget, rng) -> Configuration | None:
    for _ in range(budget.ik_samples):
        q = model.sample_ik(position, orientation, rng)
        if q is not None:
            return q
    return None


def plan_constrained(problem: FrameProblem, bvh: StaticBvh | None, model, q1: Configuration,
                     q2: Configuration, orientation, directed: DirectedElement, printed, i=0,
                     rng=None) -> Trajectory | None:
    """Straight extrusion path ``q1 -> q2`` at constant orientation with retraction moves.

    The free-flying model realizes the extrusion manifold exactly, so the
    result is the unique straight path; ``None`` when it is not collision-free.
    """
    budget = _budget(i)
    approach = _ik(model, retraction_point(problem, directed.start, orientation), orientation, budget, rng)
    depart = _ik(model, retraction_point(problem, directed.end, orientation), orientation, budget, rng)
    if approach is None or depart is None:
        return None
    trajectory = Trajectory((approach, q1, q2, depart), EXTRUSION, directed, np.asarray(orientation, dtype=float))
    if not trajectory_safe(problem, bvh, trajectory, printed, ignore=directed.element):
        return None
    return trajectory


def sample_extrusion(problem: FrameProblem, bvh: StaticBvh | None, model, e: int, printed, i,
                     rng: np.random.Generator, deadline: float | None = None) -> Trajectory | None:
    """Sample a direction, orientation and IK solutions, then plan the extrusion of ``e``.

    The transition configurations must also be valid transit endpoints: the
    approach against ``printed`` and the departure against ``printed | {e}``.
    """
    budget = _budget(i)
    printed = frozenset(printed)
    nodes = printed_nodes(problem, printed)
    starts = sorted(n for n in problem.elements[e] if n in nodes)
    if not starts:
        return None
    with_e = printed | {e}
    for _ in range(budget.orientation_samples):
        if _expired(deadline):
            return None
        n1 = int(starts[rng.integers(len(starts))]) if len(starts) > 1 else starts[0]
        a, b = problem.elements[e]
        n2 = b if n1 == a else a
        directed = DirectedElement(e, n1, n2)
        orientation = sample_orientation(problem, directed, rng)
        q1 = _ik(model, problem.nodes[n1], orientation, budget, rng)
        q2 = _ik(model, problem.nodes[n2], orientation, budget, rng)
        if q1 is None or q2 is None:
            continue
        trajectory = plan_constrained(problem, bvh, model, q1, q2, orientation, directed, printed, budget, rng)
        if trajectory is None:
            continue
        if tool_collides(problem, bvh, trajectory.start, printed):
            continue
        if tool_collides(problem, bvh, trajectory.end, with_e):
            continue
        return trajectory
    return None


# -- transit planning -----------------------------------------------------------

class _Tree:
    def __init__(self, root: Configuration, rot_weight: float):
        self.configs = [root]
        self.parents = [-1]
        self.positions = np.zeros((64, 3))
        self.quats = np.zeros((64, 4))
        self.positions[0] = root.position
        self.quats[0] = root.orientation
        self.rot_weight = rot_weight

    def __len__(self):
        return len(self.configs)

    def add(self, q: Configuration, parent: int) -> int:
        n = len(self.configs)
        if n == len(self.positions):
            self.positions = np.vstack([self.positions, np.zeros_like(self.positions)])
            self.quats = np.vstack([self.quats, np.zeros_like(self.quats)])
        self.configs.append(q)
        self.parents.append(parent)
        self.positions[n] = q.position
        self.quats[n] = q.orientation
        return n

    def nearest(self, q: Configuration) -> int:
        n = len(self.configs)
        d_pos = np.linalg.norm(self.positions[:n] - q.position, axis=1)
        dots = np.clip(np.abs(self.quats[:n] @ q.orientation), 0.0, 1.0)
        d = d_pos + self.rot_weight * 2.0 * np.arccos(dots)
        return int(np.argmin(d))

    def path_to_root(self, index: int) -> list[Configuration]:
        out = []
        while index != -1:
            out.append(self.configs[index])
            index = self.parents[index]
        return out


@dataclass
class _Rrt:
    problem: FrameProblem
    bvh: StaticBvh | None
    model: object
    printed: frozenset
    step: float
    checks: int = 0

    def edge_free(self, q_a: Configuration, q_b: Configuration) -> bool:
        self.checks += 1
        return trajectory_safe(self.problem, self.bvh, (q_a, q_b), self.printed)

    def steer(self, q_from: Configuration, q_to: Configuration) -> Configuration:
        d = self.model.distance(q_from, q_to)
        if d <= self.step:
            return q_to
        return self.model.interpolate(q_from, q_to, self.step / d)

    def extend(self, tree: _Tree, target: Configuration) -> tuple[str, int]:
        near = tree.nearest(target)
        q_near = tree.configs[near]
        q_new = self.steer(q_near, target)
        if not self.edge_free(q_near, q_new):
            return "trapped", near
        index = tree.add(q_new, near)
        return ("reached" if q_new is target else "advanced"), index

    def connect(self, tree: _Tree, target: Configuration) -> tuple[str, int]:
        while True:
            status, index = self.extend(tree, target)
            if status != "advanced":
                return status, index


def plan_motion(problem: FrameProblem, bvh: StaticBvh | None, model, q_start: Configuration,
                q_goal: Configuration, printed, i, rng: np.random.Generator, smooth: bool = True,
                step: float = 0.02, deadline: float | None = None) -> Trajectory | None:
    """Bidirectional RRT (RRT-Connect) transit between two configurations.

    The direct segment is tried first. The iteration cap is the budget's RRT
    size; successful paths are shortcut-smoothed.
    """
    budget = _budget(i)
    printed = frozenset(printed)
    if q_start.close_to(q_goal, 0.0):
        return Trajectory((q_start, q_goal))
    if tool_collides(problem, bvh, q_start, printed) or tool_collides(problem, bvh, q_goal, printed):
        return None
    rrt = _Rrt(problem, bvh, model, printed, step)
    if rrt.edge_free(q_start, q_goal):
        return Trajectory((q_start, q_goal))
    rot_weight = getattr(model, "rot_weight", 0.1)
    tree_a, tree_b = _Tree(q_start, rot_weight), _Tree(q_goal, rot_weight)
    swapped = False
    path = None
    for _ in range(budget.rrt_iterations):
        if _expired(deadline):
            return None
        target = model.sample(rng)
        status, index_a = rrt.extend(tree_a, target)
        if status != "trapped":
            status_b, index_b = rrt.connect(tree_b, tree_a.configs[index_a])
            if status_b == "reached":
                half_a = tree_a.path_to_root(index_a)[::-1]
                half_b = tree_b.path_to_root(index_b)
                path = half_a + half_b[1:]
                if swapped:
                    path = path[::-1]
                break
        tree_a, tree_b = tree_b, tree_a
        swapped = not swapped
    if path is None:
        return None
    if smooth:
        path = shortcut(rrt, path, rng)
    return Trajectory(tuple(path))


def shortcut(rrt: _Rrt, path: list[Configuration], rng: np.random.Generator,
             attempts: int = 50) -> list[Configuration]:
    """Random shortcutting; every replacement segment is re-checked."""
    path = list(path)
    for _ in range(attempts):
        if len(path) <= 2:
            break
        a, b = sorted(int(v) for v in rng.choice(len(path), size=2, replace=False))
        if b - a < 2:
            continue
        if rrt.edge_free(path[a], path[b]):
            path = path[:a + 1] + path[b:]
    return path
