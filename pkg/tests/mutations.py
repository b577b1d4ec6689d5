"""Plan mutations for exercising the validator, with the clause each must trigger."""
from __future__ import annotations

import numpy as np

from extruplan.geometry import tool_axis
from extruplan.kinematics import Configuration
from extruplan.motion import EXTRUSION, Trajectory
from extruplan.validate import CHAINING, COLLISION, CONSTRAINT, SEQUENCE, Plan


def swap_extrusions(problem, plan: Plan, rng) -> Plan:
    trajs = list(plan.trajectories)
    slots = [k for k, t in enumerate(trajs) if t.kind == EXTRUSION]
    i, j = sorted(int(v) for v in rng.choice(len(slots), size=2, replace=False))
    trajs[slots[i]], trajs[slots[j]] = trajs[slots[j]], trajs[slots[i]]
    return Plan(tuple(trajs))


def displace_transit_waypoint(problem, plan: Plan, rng) -> Plan:
    """Route an intermediate transit (not the first or last) through the middle of a printed element."""
    trajs = list(plan.trajectories)
    index = 2 * int(rng.integers(1, len(plan.extrusions)))
    printed = [t.element for t in trajs[:index] if t.kind == EXTRUSION]
    e = printed[int(rng.integers(len(printed)))]
    a, b = problem.elements[e]
    middle = 0.5 * (problem.nodes[a] + problem.nodes[b])
    transit = trajs[index]
    waypoints = list(transit.waypoints)
    waypoints.insert(1, Configuration(middle, waypoints[0].orientation))
    trajs[index] = Trajectory(tuple(waypoints), transit.kind)
    return Plan(tuple(trajs))


def flip_orientation(problem, plan: Plan, rng) -> Plan:
    """Turn one extrusion's tool around so it points along the extrusion direction."""
    trajs = list(plan.trajectories)
    index = 2 * int(rng.integers(len(plan.extrusions))) + 1
    traj = trajs[index]
    # half turn about an axis perpendicular to the tool axis reverses it
    axis = tool_axis(traj.orientation)
    perp = np.cross(axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(perp) < 1e-6:
        perp = np.cross(axis, [0.0, 1.0, 0.0])
    perp /= np.linalg.norm(perp)
    half_turn = np.concatenate([[0.0], perp])
    w1, v1 = half_turn[0], half_turn[1:]
    w2, v2 = traj.orientation[0], traj.orientation[1:]
    flipped = np.concatenate([[w1 * w2 - v1 @ v2], w1 * v2 + w2 * v1 + np.cross(v1, v2)])
    waypoints = tuple(Configuration(w.position, flipped) for w in traj.waypoints)
    trajs[index] = Trajectory(waypoints, EXTRUSION, traj.directed, flipped)
    return Plan(tuple(trajs))


def drop_element(problem, plan: Plan, rng) -> Plan:
    trajs = list(plan.trajectories)
    index = 2 * int(rng.integers(len(plan.extrusions))) + 1
    del trajs[index:index + 2]
    return Plan(tuple(trajs))


MUTATIONS = {
    "swap": (swap_extrusions, CHAINING),
    "displace": (displace_transit_waypoint, COLLISION),
    "orientation": (flip_orientation, CONSTRAINT),
    "drop": (drop_element, SEQUENCE),
}
