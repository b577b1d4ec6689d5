"""Plans and the independent plan checker.

The checker rebuilds its own collision structure and stiffness cache and
never consults search state. Violations carry stable clause identifiers:

* ``structure``: malformed alternation or extrusion annotations
* ``a_chaining``: consecutive trajectories do not meet, or the plan does not start and end at q0
* ``b_collision``: a trajectory leaves the collision-free space of the structure printed before it
* ``c_constraint``: extrusion orientation outside its hemisphere or the path strays from the element
* ``d_sequence``: the extrusion order fails coverage, connectivity or per-prefix stiffness
* ``e_final_transit``: the return transit collides with the finished structure
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame import DirectedElement, FrameProblem, is_valid_sequence
from .geometry import (StaticBvh, collision_step, discretize_segment, orientation_feasible,
                       point_segment_distance, quat_angle, trajectory_safe)
from .kinematics import problem_start
from .motion import EXTRUSION, TRANSIT, Trajectory
from .stiffness import StiffnessChecker

CHAIN_TOL = 1e-9

STRUCTURE = "structure"
CHAINING = "a_chaining"
COLLISION = "b_collision"
CONSTRAINT = "c_constraint"
SEQUENCE = "d_sequence"
FINAL_TRANSIT = "e_final_transit"


@dataclass(frozen=True)
class Plan:
    """Alternating transit and extrusion trajectories, starting and ending with a transit."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    @property
    def extrusions(self) -> list[Trajectory]:
        return [t for t in self.trajectories if t.kind == EXTRUSION]

    @property
    def sequence(self) -> list[DirectedElement]:
        return [t.directed for t in self.extrusions]

    @property
    def orientations(self) -> list[np.ndarray]:
        return [t.orientation for t in self.extrusions]

    def to_json(self) -> dict:
        return {
            "sequence": [list(d) for d in self.sequence],
            "trajectories": [t.to_json() for t in self.trajectories],
        }

    @classmethod
    def from_json(cls, data: dict) -> Plan:
        return cls(tuple(Trajectory.from_json(t) for t in data["trajectories"]))


def dump_plan(plan: Plan) -> str:
    return json.dumps(plan.to_json(), indent=1, sort_keys=True) + "\n"


def save_plan(plan: Plan, path) -> None:
    Path(path).write_text(dump_plan(plan))


def load_plan(path) -> Plan:
    return Plan.from_json(json.loads(Path(path).read_text()))


@dataclass
class Violation:
    clause: str
    detail: str
    trajectory: int | None = None
    extrusion: int | None = None

    def to_json(self) -> dict:
        out = {"clause": self.clause, "detail": self.detail}
        if self.trajectory is not None:
            out["trajectory"] = self.trajectory
        if self.extrusion is not None:
            out["extrusion"] = self.extrusion
        return out


@dataclass
class Verdict:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid

    @property
    def clauses(self) -> set[str]:
        return {v.clause for v in self.violations}

    def to_json(self) -> dict:
        return {"valid": self.valid, "violations": [v.to_json() for v in self.violations]}


def _structure(problem: FrameProblem, plan: Plan) -> list[Violation]:
    out = []
    trajs = plan.trajectories
    if len(trajs) % 2 == 0:
        out.append(Violation(STRUCTURE, f"expected an odd number of trajectories, got {len(trajs)}"))
    for index, traj in enumerate(trajs):
        expected = TRANSIT if index % 2 == 0 else EXTRUSION
        if traj.kind != expected:
            out.append(Violation(STRUCTURE, f"expected {expected}, got {traj.kind}", trajectory=index))
        elif expected == EXTRUSION:
            d = traj.directed
            if d is None or traj.orientation is None or not 0 <= d.element < problem.num_elements:
                out.append(Violation(STRUCTURE, "extrusion lacks a valid element annotation", trajectory=index))
            elif {d.start, d.end} != set(problem.elements[d.element]):
                out.append(Violation(STRUCTURE, f"endpoints do not match element {d.element}", trajectory=index))
    return out


def _chaining(problem: FrameProblem, plan: Plan) -> list[Violation]:
    out = []
    trajs = plan.trajectories
    q0 = problem_start(problem)
    if not trajs[0].start.close_to(q0, CHAIN_TOL):
        out.append(Violation(CHAINING, "plan does not start at q0", trajectory=0))
    if not trajs[-1].end.close_to(q0, CHAIN_TOL):
        out.append(Violation(CHAINING, "plan does not end at q0", trajectory=len(trajs) - 1))
    for index in range(len(trajs) - 1):
        if not trajs[index].end.close_to(trajs[index + 1].start, CHAIN_TOL):
            out.append(Violation(CHAINING, f"trajectory {index} does not end where {index + 1} starts",
                                 trajectory=index))
    return out


def _extruding_span(problem: FrameProblem, traj: Trajectory) -> tuple[int, int] | None:
    p_start = problem.nodes[traj.directed.start]
    p_end = problem.nodes[traj.directed.end]
    tips = np.array([q.position for q in traj.waypoints])
    at_start = np.flatnonzero(np.max(np.abs(tips - p_start), axis=1) <= CHAIN_TOL)
    at_end = np.flatnonzero(np.max(np.abs(tips - p_end), axis=1) <= CHAIN_TOL)
    if not at_start.size or not at_end.size or at_end[-1] <= at_start[0]:
        return None
    return int(at_start[0]), int(at_end[-1])


def constraint_violation(problem: FrameProblem, traj: Trajectory) -> float | None:
    """Largest deviation (m) from the extrusion manifold over the extruding portion.

    Orientation error counts as the displacement it causes at the tool's far
    end. ``None`` when the trajectory never visits both element endpoints.
    """
    span = _extruding_span(problem, traj)
    if span is None:
        return None
    p_start = problem.nodes[traj.directed.start]
    p_end = problem.nodes[traj.directed.end]
    sigma = np.asarray(traj.orientation, dtype=float)
    worst = 0.0
    step = collision_step(problem)
    for q_a, q_b in zip(traj.waypoints[span[0]:span[1]], traj.waypoints[span[0] + 1:span[1] + 1]):
        tips, quats = discretize_segment(problem, q_a, q_b, step)
        position_error = float(np.max(point_segment_distance(tips, p_start, p_end)))
        angle_error = max(quat_angle(q, sigma) for q in quats)
        worst = max(worst, position_error, problem.tool.length * angle_error)
    return worst


def _constraints(problem: FrameProblem, plan: Plan) -> list[Violation]:
    out = []
    eps = problem.tolerances.eps
    for k, index in enumerate(range(1, len(plan.trajectories), 2)):
        traj = plan.trajectories[index]
        if not orientation_feasible(problem, traj.directed, traj.orientation):
            out.append(Violation(CONSTRAINT, "orientation outside the feasible hemisphere",
                                 trajectory=index, extrusion=k))
        gamma = constraint_violation(problem, traj)
        if gamma is None:
            out.append(Violation(CONSTRAINT, "trajectory does not extrude between the element nodes",
                                 trajectory=index, extrusion=k))
        elif not gamma < eps:
            out.append(Violation(CONSTRAINT, f"constraint violation {gamma:.3g} m is not below {eps:g}",
                                 trajectory=index, extrusion=k))
    return out


def _collisions(problem: FrameProblem, plan: Plan, bvh: StaticBvh) -> list[Violation]:
    out = []
    printed: set[int] = set()
    last = len(plan.trajectories) - 1
    for index, traj in enumerate(plan.trajectories):
        if traj.kind == EXTRUSION:
            e = traj.directed.element
            if not trajectory_safe(problem, bvh, traj, printed, ignore=e):
                out.append(Violation(COLLISION, f"extrusion of element {e} collides",
                                     trajectory=index, extrusion=index // 2))
            printed.add(e)
        elif not trajectory_safe(problem, bvh, traj, printed):
            clause = FINAL_TRANSIT if index == last else COLLISION
            out.append(Violation(clause, "transit collides", trajectory=index))
    return out


def validate_plan(problem: FrameProblem, plan: Plan) -> Verdict:
    """Check a plan end to end; every violated clause is reported."""
    verdict = Verdict()
    if not plan.trajectories:
        verdict.violations.append(Violation(STRUCTURE, "plan is empty"))
        return verdict
    verdict.violations += _structure(problem, plan)
    if verdict.violations:
        return verdict
    verdict.violations += _chaining(problem, plan)
    verdict.violations += _collisions(problem, plan, StaticBvh(problem))
    verdict.violations += _constraints(problem, plan)
    check = is_valid_sequence(problem, plan.sequence, StiffnessChecker(problem))
    if not check:
        verdict.violations.append(Violation(SEQUENCE, f"{check.reason} at position {check.index}",
                                            extrusion=check.index))
    return verdict
