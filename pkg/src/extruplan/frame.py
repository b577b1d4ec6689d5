"""Frame problem data model, JSON ingestion and structural-graph helpers."""
from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

_TOOL_DEFAULTS = {"length": 0.05, "radius": 0.004}


class ProblemError(ValueError):
    """Raised when a problem file is malformed or violates an invariant."""


@dataclass(frozen=True)
class MaterialSpec:
    E: float
    G: float
    density: float
    area: float
    Iy: float
    Iz: float
    J: float
    g: float = 9.81

    def __post_init__(self):
        for name in ("E", "G", "density", "area", "Iy", "Iz", "J", "g"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ProblemError(f"material.{name} must be positive, got {value!r}")

    @classmethod
    def circular(cls, radius: float, E: float, G: float, density: float, g: float = 9.81) -> MaterialSpec:
        """Solid circular section of the given radius."""
        area = math.pi * radius**2
        inertia = math.pi * radius**4 / 4.0
        return cls(E=E, G=G, density=density, area=area, Iy=inertia, Iz=inertia, J=2.0 * inertia, g=g)

    def to_json(self) -> dict:
        return {"E": self.E, "G": self.G, "density": self.density, "area": self.area,
                "Iy": self.Iy, "Iz": self.Iz, "J": self.J, "g": self.g}


@dataclass(frozen=True)
class ToleranceSpec:
    """Stiffness and motion tolerances.

    ``rot`` is infinite unless configured, which makes the stiffness test
    translational-only.
    """

    trans: float
    eps: float
    retraction: float
    rot: float = math.inf

    def __post_init__(self):
        if not self.trans > 0:
            raise ProblemError(f"tolerances.trans must be positive, got {self.trans!r}")
        if not self.rot > 0:
            raise ProblemError(f"tolerances.rot must be positive, got {self.rot!r}")
        if not self.eps > 0:
            raise ProblemError(f"tolerances.eps must be positive, got {self.eps!r}")
        if not self.retraction >= 0:
            raise ProblemError(f"tolerances.retraction must be >= 0, got {self.retraction!r}")

    def to_json(self) -> dict:
        out = {"trans": self.trans, "eps": self.eps, "retraction": self.retraction}
        out["rot"] = None if math.isinf(self.rot) else self.rot
        return out


@dataclass(frozen=True)
class ToolSpec:
    """Capsule approximation of the extruder body, extending from the tip along tool -z."""

    length: float = _TOOL_DEFAULTS["length"]
    radius: float = _TOOL_DEFAULTS["radius"]

    def __post_init__(self):
        if not (self.length >= 0 and self.radius > 0):
            raise ProblemError("tool length must be >= 0 and radius > 0")


class DirectedElement(NamedTuple):
    element: int
    start: int
    end: int


@dataclass(frozen=True, eq=False)
class FrameProblem:
    """An extrusion problem: geometric graph, material, robot start and tolerances.

    Node and element ids are indices into ``nodes`` and ``elements``.
    """

    nodes: np.ndarray
    elements: tuple[tuple[int, int], ...]
    ground: frozenset[int]
    material: MaterialSpec
    radius: float
    q0: dict
    tolerances: ToleranceSpec
    tool: ToolSpec = field(default_factory=ToolSpec)
    workspace: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None
    obstacles: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] = ()
    name: str = ""

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64).reshape(-1, 3)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", tuple((int(a), int(b)) for a, b in self.elements))
        object.__setattr__(self, "ground", frozenset(int(g) for g in self.ground))
        if self.workspace is None:
            object.__setattr__(self, "workspace", self._default_workspace())
        _check_problem(self)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def all_elements(self) -> frozenset[int]:
        return frozenset(range(len(self.elements)))

    def element_length(self, e: int) -> float:
        a, b = self.elements[e]
        return float(np.linalg.norm(self.nodes[b] - self.nodes[a]))

    def element_points(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.elements[e]
        return self.nodes[a], self.nodes[b]

    def incident(self, node: int) -> list[int]:
        return self._incidence()[node]

    def _incidence(self) -> list[list[int]]:
        cached = self.__dict__.get("_incidence_cache")
        if cached is None:
            cached = [[] for _ in range(self.num_nodes)]
            for e, (a, b) in enumerate(self.elements):
                cached[a].append(e)
                cached[b].append(e)
            object.__setattr__(self, "_incidence_cache", cached)
        return cached

    def _default_workspace(self):
        tool = self.tool.length + 0.1
        lo = self.nodes.min(axis=0) - tool
        hi = self.nodes.max(axis=0) + tool
        lo[2] = min(0.0, float(self.nodes[:, 2].min()))
        return tuple(float(v) for v in lo), tuple(float(v) for v in hi)

    def to_json(self) -> dict:
        out = {
            "nodes": [[float(v) for v in p] for p in self.nodes],
            "elements": [list(e) for e in self.elements],
            "ground": sorted(self.ground),
            "material": self.material.to_json(),
            "radius": self.radius,
            "q0": self.q0,
            "tolerances": self.tolerances.to_json(),
            "tool": {"length": self.tool.length, "radius": self.tool.radius},
            "workspace": {"min": list(self.workspace[0]), "max": list(self.workspace[1])},
        }
        if self.obstacles:
            out["obstacles"] = [{"min": list(lo), "max": list(hi)} for lo, hi in self.obstacles]
        if self.name:
            out["name"] = self.name
        return out

    def replace(self, **changes) -> FrameProblem:
        """Return a copy with some fields replaced (re-validated)."""
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return FrameProblem(**data)


def _check_problem(problem: FrameProblem) -> None:
    n = problem.num_nodes
    if not np.all(np.isfinite(problem.nodes)):
        raise ProblemError("node coordinates must be finite")
    if not problem.elements:
        raise ProblemError("problem has no elements")
    seen = set()
    for e, (a, b) in enumerate(problem.elements):
        for v in (a, b):
            if not 0 <= v < n:
                raise ProblemError(f"element {e} references unknown node {v}")
        if a == b:
            raise ProblemError(f"element {e} has identical endpoints")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ProblemError(f"duplicate element {e} between nodes {a} and {b}")
        seen.add(key)
        if not problem.element_length(e) > 0:
            raise ProblemError(f"element {e} has nonpositive length")
    if not problem.ground:
        raise ProblemError("ground node set is empty")
    for g in problem.ground:
        if not 0 <= g < n:
            raise ProblemError(f"ground references unknown node {g}")
    if not problem.radius > 0:
        raise ProblemError("radius must be positive")
    floating = set(range(problem.num_elements)) - grounded_elements(problem, problem.all_elements)
    if floating:
        raise ProblemError(f"element {min(floating)} is not grounded")
    ground_z = [problem.nodes[g][2] for g in problem.ground]
    if max(abs(z) for z in ground_z) > 1e-9:
        logger.warning("ground nodes do not lie on z=0; EuclideanDist assumes the xy ground plane")


def _parse_quat_config(raw) -> dict:
    if not isinstance(raw, dict) or "position" not in raw or "orientation" not in raw:
        raise ProblemError("q0 must have 'position' and 'orientation'")
    position = [float(v) for v in raw["position"]]
    orientation = [float(v) for v in raw["orientation"]]
    if len(position) != 3 or len(orientation) != 4:
        raise ProblemError("q0 position must have 3 and orientation 4 components")
    norm = math.sqrt(sum(v * v for v in orientation))
    if abs(norm - 1.0) > 1e-6:
        raise ProblemError("q0 orientation must be a unit quaternion")
    return {"position": position, "orientation": orientation}


def problem_from_json(data: dict, name: str = "") -> FrameProblem:
    """Build a validated FrameProblem from the decoded JSON schema."""
    try:
        material = MaterialSpec(**{k: float(v) for k, v in data["material"].items()})
        tol = data["tolerances"]
        rot = tol.get("rot")
        tolerances = ToleranceSpec(
            trans=float(tol["trans"]),
            rot=math.inf if rot is None else float(rot),
            eps=float(tol["eps"]),
            retraction=float(tol["retraction"]),
        )
        tool = ToolSpec(**{k: float(v) for k, v in data.get("tool", _TOOL_DEFAULTS).items()})
        workspace = data.get("workspace")
        if workspace is not None:
            workspace = (tuple(float(v) for v in workspace["min"]), tuple(float(v) for v in workspace["max"]))
        obstacles = tuple(
            (tuple(float(v) for v in box["min"]), tuple(float(v) for v in box["max"]))
            for box in data.get("obstacles", [])
        )
        nodes = np.array(data["nodes"], dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ProblemError("nodes must be a list of [x, y, z] triples")
        elements = [tuple(int(v) for v in pair) for pair in data["elements"]]
        if any(len(pair) != 2 for pair in elements):
            raise ProblemError("elements must be pairs of node ids")
        return FrameProblem(
            nodes=nodes,
            elements=tuple(elements),
            ground=frozenset(int(g) for g in data["ground"]),
            material=material,
            radius=float(data["radius"]),
            q0=_parse_quat_config(data["q0"]),
            tolerances=tolerances,
            tool=tool,
            workspace=workspace,
            obstacles=obstacles,
            name=data.get("name", name),
        )
    except KeyError as exc:
        raise ProblemError(f"missing required key {exc.args[0]!r}") from exc
    except (TypeError, AttributeError) as exc:
        raise ProblemError(f"malformed problem: {exc}") from exc


def load_problem(path) -> FrameProblem:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProblemError(f"cannot parse {path}: {exc}") from exc
    return problem_from_json(data, name=path.stem)


def save_problem(problem: FrameProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_json(), indent=1))


def printed_nodes(problem: FrameProblem, printed: Iterable[int]) -> set[int]:
    """N_P: ground nodes plus every endpoint of a printed element."""
    nodes = set(problem.ground)
    for e in printed:
        nodes.update(problem.elements[e])
    return nodes


def printable_elements(problem: FrameProblem, printed: Iterable[int]) -> set[int]:
    printed = frozenset(printed)
    nodes = printed_nodes(problem, printed)
    return {
        e for e, (a, b) in enumerate(problem.elements)
        if e not in printed and (a in nodes or b in nodes)
    }


def grounded_elements(problem: FrameProblem, printed: Iterable[int]) -> set[int]:
    """Elements of ``printed`` transitively connected to a ground node through ``printed``."""
    printed = set(printed)
    reached_nodes = set(problem.ground)
    reached = set()
    queue = deque(problem.ground)
    while queue:
        node = queue.popleft()
        for e in problem.incident(node):
            if e in printed and e not in reached:
                reached.add(e)
                for other in problem.elements[e]:
                    if other not in reached_nodes:
                        reached_nodes.add(other)
                        queue.append(other)
    return reached


def is_grounded(problem: FrameProblem, printed: Iterable[int]) -> bool:
    printed = set(printed)
    return len(grounded_elements(problem, printed)) == len(printed)


@dataclass
class SequenceCheck:
    valid: bool
    index: int | None = None
    reason: str | None = None

    def __bool__(self):
        return self.valid


def is_valid_sequence(problem: FrameProblem, sequence: list[DirectedElement], stiff=None) -> SequenceCheck:
    """Check coverage, connectivity and per-prefix stiffness of a directed sequence.

    ``stiff`` is a callable on a set of element ids; defaults to a fresh
    :class:`~extruplan.stiffness.StiffnessChecker`.
    """
    if stiff is None:
        from .stiffness import StiffnessChecker
        stiff = StiffnessChecker(problem)
    seen: set[int] = set()
    for index, item in enumerate(sequence):
        e, start, end = item
        if not 0 <= e < problem.num_elements:
            return SequenceCheck(False, index, "unknown_element")
        if e in seen:
            return SequenceCheck(False, index, "duplicate")
        if {start, end} != set(problem.elements[e]):
            return SequenceCheck(False, index, "direction")
        if start not in printed_nodes(problem, seen):
            return SequenceCheck(False, index, "connectivity")
        seen.add(e)
        if not stiff(frozenset(seen)):
            return SequenceCheck(False, index, "stiffness")
    if len(seen) != problem.num_elements:
        return SequenceCheck(False, len(sequence), "omission")
    return SequenceCheck(True)


def orient_sequence(problem: FrameProblem, order: Iterable[int]) -> list[DirectedElement]:
    """Direct each element away from an already printed endpoint, preferring its stored first node.

    Elements with no printed endpoint keep their stored direction, which a
    sequence check then reports as a connectivity failure.
    """
    out = []
    seen: set[int] = set()
    for e in order:
        a, b = problem.elements[e]
        nodes = printed_nodes(problem, seen)
        start, end = (b, a) if a not in nodes and b in nodes else (a, b)
        out.append(DirectedElement(e, start, end))
        seen.add(e)
    return out
