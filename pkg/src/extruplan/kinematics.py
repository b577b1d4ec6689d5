"""Configuration space of the extruder and the default free-flying kinematic model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import FrameProblem
from .geometry import as_quat, quat_angle, slerp
from scipy.spatial.transform import Rotation


@dataclass(frozen=True, eq=False)
class Configuration:
    """Tip position (m) and world-from-tool orientation quaternion ``(w, x, y, z)``."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.array(self.position, dtype=float).reshape(3)
        quat = np.array(self.orientation, dtype=float).reshape(4)
        quat /= np.linalg.norm(quat)
        if quat[0] < 0:
            quat = -quat
        pos.setflags(write=False)
        quat.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.position] + [float(v) for v in self.orientation]

    @classmethod
    def from_list(cls, values) -> Configuration:
        values = list(values)
        return cls(values[:3], values[3:7])

    @classmethod
    def from_json(cls, data: dict) -> Configuration:
        return cls(data["position"], data["orientation"])

    def to_json(self) -> dict:
        return {"position": [float(v) for v in self.position],
                "orientation": [float(v) for v in self.orientation]}

    def close_to(self, other: Configuration, tol: float = 1e-9) -> bool:
        """Componentwise match of position and quaternion (up to sign) within ``tol``."""
        if float(np.max(np.abs(self.position - other.position))) > tol:
            return False
        a, b = self.orientation, other.orientation
        return min(float(np.max(np.abs(a - b))), float(np.max(np.abs(a + b)))) <= tol

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return bool(np.array_equal(self.position, other.position)
                    and np.array_equal(self.orientation, other.orientation))

    def __hash__(self):
        return hash((self.position.tobytes(), self.orientation.tobytes()))


class FreeFlyingExtruder:
    """Six-DOF free-flying end effector bounded by an axis-aligned workspace.

    Its inverse kinematics is exact: a pose inside the workspace is its own
    configuration. ``rot_weight`` (m/rad) mixes orientation into the distance.
    """

    def __init__(self, workspace, rot_weight: float = 0.1):
        lo, hi = workspace
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.rot_weight = rot_weight

    @classmethod
    def for_problem(cls, problem: FrameProblem, rot_weight: float = 0.1) -> FreeFlyingExtruder:
        return cls(problem.workspace, rot_weight)

    def forward_position(self, q: Configuration) -> np.ndarray:
        return q.position

    def forward_orientation(self, q: Configuration) -> np.ndarray:
        return q.orientation

    def in_workspace(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - 1e-12) and np.all(p <= self.hi + 1e-12))

    def sample_ik(self, position, orientation, rng: np.random.Generator | None = None) -> Configuration | None:
        if not self.in_workspace(position):
            return None
        return Configuration(position, orientation)

    def distance(self, q1: Configuration, q2: Configuration) -> float:
        return float(np.linalg.norm(q1.position - q2.position)) + self.rot_weight * quat_angle(
            q1.orientation, q2.orientation)

    def interpolate(self, q1: Configuration, q2: Configuration, lam: float) -> Configuration:
        if lam <= 0.0:
            return q1
        if lam >= 1.0:
            return q2
        position = q1.position + lam * (q2.position - q1.position)
        if quat_angle(q1.orientation, q2.orientation) < 1e-12:
            return Configuration(position, q1.orientation)
        return Configuration(position, slerp(q1.orientation, q2.orientation, [lam])[0])

    def sample(self, rng: np.random.Generator) -> Configuration:
        position = rng.uniform(self.lo, self.hi)
        return Configuration(position, as_quat(Rotation.random(random_state=rng)))


def sample_ik(model, position, orientation, rng=None) -> Configuration | None:
    return model.sample_ik(position, orientation, rng)


def interpolate(model, q1: Configuration, q2: Configuration, lam: float) -> Configuration:
    return model.interpolate(q1, q2, lam)


def problem_start(problem: FrameProblem) -> Configuration:
    return Configuration.from_json(problem.q0)
