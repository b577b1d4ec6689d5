"""Synthetic benchmark families at desk scale.

Every generator returns the problem together with a witness order: a
grounded extrusion sequence whose every prefix is stiff. Families:

* ``tower``: grid of columns with a horizontal lattice on every level
* ``pyramid``: stacked square pyramids with level lattices
* ``arch``: two planar truss arches joined by cross ties
* ``cantilever``: portal bays whose arms meet at a crown held up by a column
* ``trap``: a post carrying a short element under a tent of legs
* ``chain``: a single vertical column, the smallest sanity instance
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .frame import (DirectedElement, FrameProblem, MaterialSpec, ToleranceSpec, is_valid_sequence,
                    printed_nodes)
from .search import GeometryOnlyInstance
from .stiffness import analyze

RADIUS = 0.002
SEGMENT = 0.05
RETRACTION = 0.01
EPS = 1e-6
PLA = {"E": 3.5e9, "G": 1.3e9, "density": 1240.0}
DOWN = [0.0, 1.0, 0.0, 0.0]
FAMILIES = ("tower", "pyramid", "arch", "cantilever", "trap", "chain")


@dataclass(frozen=True)
class Generated:
    problem: FrameProblem
    witness: tuple[DirectedElement, ...]
    family: str


def desk_material() -> MaterialSpec:
    return MaterialSpec.circular(RADIUS, **PLA)


def _build(name: str, nodes, elements, ground, trans: float = 1.0) -> FrameProblem:
    nodes = np.asarray(nodes, dtype=float)
    center = nodes.mean(axis=0)
    top = float(nodes[:, 2].max())
    q0 = {"position": [float(center[0]), float(center[1]), top + 0.08], "orientation": DOWN}
    return FrameProblem(nodes=nodes, elements=tuple(elements), ground=frozenset(ground),
                        material=desk_material(), radius=RADIUS, q0=q0,
                        tolerances=ToleranceSpec(trans=trans, eps=EPS, retraction=RETRACTION), name=name)


def layered_order(problem: FrameProblem) -> list[DirectedElement]:
    """Grounded order printing the lowest printable element midpoint first."""
    order = []
    printed: set[int] = set()
    heights = [0.5 * (problem.nodes[a][2] + problem.nodes[b][2]) for a, b in problem.elements]
    while len(printed) < problem.num_elements:
        nodes = printed_nodes(problem, printed)
        candidates = [e for e, (a, b) in enumerate(problem.elements)
                      if e not in printed and (a in nodes or b in nodes)]
        e = min(candidates, key=lambda k: (heights[k], k))
        a, b = problem.elements[e]
        start, end = (a, b) if a in nodes else (b, a)
        order.append(DirectedElement(e, start, end))
        printed.add(e)
    return order


def max_prefix_deflection(problem: FrameProblem, order) -> float:
    printed: set[int] = set()
    worst = 0.0
    for step in order:
        printed.add(step.element)
        worst = max(worst, analyze(problem, printed).max_trans)
    return worst


def _with_margin(problem: FrameProblem, order, margin: float = 3.0) -> FrameProblem:
    tol = margin * max_prefix_deflection(problem, order)
    return problem.replace(tolerances=ToleranceSpec(trans=tol, eps=EPS, retraction=RETRACTION))


def chain(n: int = 3, spacing: float = SEGMENT) -> Generated:
    nodes = [(0.0, 0.0, k * spacing) for k in range(n + 1)]
    elements = [(k, k + 1) for k in range(n)]
    problem = _build(f"chain_{n}", nodes, elements, [0])
    order = [DirectedElement(k, k, k + 1) for k in range(n)]
    return Generated(_with_margin(problem, order), tuple(order), "chain")


def tower(nx: int, ny: int, nz: int, spacing: float = SEGMENT) -> Generated:
    """``nx`` x ``ny`` columns of ``nz`` segments with a lattice at every level above ground."""
    index = {}
    nodes = []
    for k in range(nz + 1):
        for j in range(ny):
            for i in range(nx):
                index[i, j, k] = len(nodes)
                nodes.append((i * spacing, j * spacing, k * spacing))
    elements = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                elements.append((index[i, j, k], index[i, j, k + 1]))
    for k in range(1, nz + 1):
        for j in range(ny):
            for i in range(nx):
                if i + 1 < nx:
                    elements.append((index[i, j, k], index[i + 1, j, k]))
                if j + 1 < ny:
                    elements.append((index[i, j, k], index[i, j + 1, k]))
    ground = [index[i, j, 0] for j in range(ny) for i in range(nx)]
    problem = _build(f"tower_{nx}x{ny}x{nz}", nodes, elements, ground)
    order = layered_order(problem)
    return Generated(_with_margin(problem, order), tuple(order), "tower")


def pyramid(n: int, spacing: float = SEGMENT) -> Generated:
    """Square pyramid truss on an ``n`` x ``n`` grid of ground nodes."""
    rise = math.sqrt(SEGMENT**2 - 2 * (spacing / 2) ** 2)
    index = {}
    nodes = []
    for k in range(n):
        for j in range(n - k):
            for i in range(n - k):
                index[i, j, k] = len(nodes)
                nodes.append(((i + k / 2) * spacing, (j + k / 2) * spacing, k * rise))
    elements = []
    for k in range(1, n):
        for j in range(n - k):
            for i in range(n - k):
                top = index[i, j, k]
                for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
                    elements.append((index[i + di, j + dj, k - 1], top))
                if i + 1 < n - k:
                    elements.append((top, index[i + 1, j, k]))
                if j + 1 < n - k:
                    elements.append((top, index[i, j + 1, k]))
    ground = [index[i, j, 0] for j in range(n) for i in range(n)]
    name = f"pyramid_{n}" if spacing == SEGMENT else f"pyramid_{n}_s{round(spacing * 1000)}"
    problem = _build(name, nodes, elements, ground)
    order = layered_order(problem)
    return Generated(_with_margin(problem, order), tuple(order), "pyramid")


def arch(segments: int, depth: float = 0.04, width: float = SEGMENT) -> Generated:
    """Two semicircular truss arches ``width`` apart, joined at every outer node."""
    radius = SEGMENT / (2 * math.sin(math.pi / (2 * segments)))
    nodes = []
    index = {}
    for plane in range(2):
        for ring, r in enumerate((radius, radius + depth)):
            for i in range(segments + 1):
                angle = math.pi * i / segments
                index[plane, ring, i] = len(nodes)
                z = max(0.0, r * math.sin(angle))
                nodes.append((r * math.cos(angle), plane * width, 0.0 if i in (0, segments) else z))
    elements = []
    for plane in range(2):
        for i in range(segments + 1):
            if 0 < i < segments:
                elements.append((index[plane, 0, i], index[plane, 1, i]))
            if i < segments:
                elements.append((index[plane, 0, i], index[plane, 0, i + 1]))
                elements.append((index[plane, 1, i], index[plane, 1, i + 1]))
                if i % 2 == 0:
                    elements.append((index[plane, 0, i], index[plane, 1, i + 1]))
                else:
                    elements.append((index[plane, 1, i], index[plane, 0, i + 1]))
    for i in range(1, segments):
        elements.append((index[0, 1, i], index[1, 1, i]))
    ground = [index[p, r, i] for p in range(2) for r in range(2) for i in (0, segments)]
    problem = _build(f"arch_{segments}", nodes, elements, ground)
    order = layered_order(problem)
    return Generated(_with_margin(problem, order), tuple(order), "arch")


def cantilever(bays: int, mast_segments: int = 2, spacing: float = SEGMENT) -> Generated:
    """Portal bays whose two-segment arms meet at a crown carried by a column.

    The tolerance admits a bay spanned without its column but no arm longer
    than one segment, so once a column is gone its arms can never be removed.
    """
    height = mast_segments * spacing
    bay = 4 * spacing
    nodes = []
    elements = []
    ground = []
    column_nodes: dict = {}

    def add(p):
        nodes.append(tuple(float(v) for v in p))
        return len(nodes) - 1

    def post(x):
        base = add((x, 0.0, 0.0))
        ground.append(base)
        prev = base
        for k in range(1, mast_segments + 1):
            node = add((x, 0.0, k * spacing))
            elements.append((prev, node))
            prev = node
        return prev

    tops = [post(j * bay) for j in range(bays + 1)]
    for j in range(bays):
        x0 = j * bay
        crown = post(x0 + bay / 2)
        column_nodes[j] = crown
        left = add((x0 + spacing, 0.0, height))
        right = add((x0 + 3 * spacing, 0.0, height))
        elements += [(tops[j], left), (left, crown), (crown, right), (right, tops[j + 1])]
    name = f"cantilever_{bays}" if mast_segments == 2 else f"cantilever_{bays}_m{mast_segments}"
    problem = _build(name, nodes, elements, ground)
    tol = _cantilever_tolerance(spacing, mast_segments)
    problem = problem.replace(tolerances=ToleranceSpec(trans=tol, eps=EPS, retraction=RETRACTION))
    order = layered_order(problem)
    check = is_valid_sequence(problem, order)
    if not check:
        raise AssertionError(f"cantilever witness fails: {check}")
    return Generated(problem, tuple(order), "cantilever")


def _cantilever_tolerance(spacing: float, mast_segments: int) -> float:
    """Geometric mean of a column-free bay's sag and a two-segment arm's tip deflection."""
    single = cantilever_bay(spacing, mast_segments)
    masts = [e for e, tag in enumerate(single.tags) if tag == "mast"]
    arms = [e for e, tag in enumerate(single.tags) if tag == "arm"]
    problem = single.problem
    span = analyze(problem, masts + arms).max_trans
    two = analyze(problem, masts + arms[:2]).max_trans
    one = analyze(problem, masts + arms[:1]).max_trans
    tol = math.sqrt(span * two)
    if not one < tol < two or not span < tol:
        raise AssertionError("cantilever bay does not separate one- and two-segment arms")
    return tol


@dataclass(frozen=True)
class _Bay:
    problem: FrameProblem
    tags: tuple[str, ...]


def cantilever_bay(spacing: float = SEGMENT, mast_segments: int = 2) -> _Bay:
    height = mast_segments * spacing
    nodes = []
    elements = []
    tags = []
    ground = []
    tops = []
    for x, tag in ((0.0, "mast"), (4 * spacing, "mast"), (2 * spacing, "column")):
        nodes.append((x, 0.0, 0.0))
        ground.append(len(nodes) - 1)
        for k in range(1, mast_segments + 1):
            nodes.append((x, 0.0, k * spacing))
            elements.append((len(nodes) - 2, len(nodes) - 1))
            tags.append(tag)
        tops.append(len(nodes) - 1)
    left_top, right_top, crown = tops
    nodes += [(spacing, 0.0, height), (3 * spacing, 0.0, height)]
    left, right = len(nodes) - 2, len(nodes) - 1
    elements += [(left_top, left), (left, crown), (right_top, right), (right, crown)]
    tags += ["arm"] * 4
    return _Bay(_build("cantilever_bay", nodes, elements, ground), tuple(tags))


def trap(legs: int = 6, post_height: float = SEGMENT, length: float = SEGMENT, apex_gap: float = 0.0115,
         lean: float = math.radians(40.0), skirt: int = 2, twist: float = 0.0) -> Generated:
    """A post carrying a vertical element ``B`` under a tent of legs meeting above it.

    The legs lean ``lean`` from vertical and sit lower than ``B``, so a
    lowest-first order prints them first, after which the tent leaves no
    tool orientation that reaches ``B``. ``skirt`` ground ties join
    consecutive leg feet.
    """
    apex_z = post_height + length + apex_gap
    spread = apex_z * math.tan(lean)
    nodes = [(0.0, 0.0, 0.0), (0.0, 0.0, post_height), (0.0, 0.0, post_height + length), (0.0, 0.0, apex_z)]
    elements = [(0, 1), (1, 2)]
    feet = []
    for k in range(legs):
        angle = twist + 2 * math.pi * k / legs
        nodes.append((spread * math.cos(angle), spread * math.sin(angle), 0.0))
        feet.append(len(nodes) - 1)
    for k in range(skirt):
        elements.append((feet[k], feet[(k + 1) % legs]))
    for foot in feet:
        elements.append((foot, 3))
    ground = [0] + feet
    name = f"trap_{legs}_l{round(math.degrees(lean))}_t{round(twist * 100)}"
    problem = _build(name, nodes, elements, ground)
    witness = [DirectedElement(e, *elements[e]) for e in range(2, 2 + skirt)]
    witness += [DirectedElement(0, 0, 1), DirectedElement(1, 1, 2)]
    witness += [DirectedElement(e, elements[e][0], 3) for e in range(2 + skirt, len(elements))]
    return Generated(_with_margin(problem, witness), tuple(witness), "trap")


def desk_suite() -> list[Generated]:
    """The end-to-end benchmark suite: twenty problems over four families, 20 to 200 elements."""
    return [
        tower(2, 2, 3), tower(2, 2, 5), tower(3, 2, 3), tower(3, 3, 2), tower(4, 4, 5),
        pyramid(3), pyramid(4), pyramid(3, spacing=0.06), pyramid(5), pyramid(4, spacing=0.055),
        arch(6), arch(8), arch(10), arch(12), arch(16),
        cantilever(2, 3), cantilever(5), cantilever(3), cantilever(4), cantilever(8),
    ]


def trap_suite() -> list[Generated]:
    return [trap(lean=math.radians(lean), twist=twist) for lean in (38.0, 40.0, 42.0) for twist in (0.0, 0.5)]


def stiffness_suite() -> list[Generated]:
    """Cantilever bays for the stiffness-only comparison."""
    return [cantilever(bays) for bays in (3, 4, 5, 6, 8, 10)]


def generate(family: str, size: int) -> Generated:
    """One instance of ``family`` scaled by ``size``."""
    if family == "tower":
        return tower(max(2, size), max(2, size), size + 1)
    if family == "pyramid":
        return pyramid(size + 1)
    if family == "arch":
        return arch(2 * size + 4)
    if family == "cantilever":
        return cantilever(size)
    if family == "trap":
        return trap(legs=size + 5)
    if family == "chain":
        return chain(size)
    raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


# -- geometry-only instances ----------------------------------------------------

def geometry_only_feasible(m: int, rng: np.random.Generator, max_trajectories: int = 5,
                           window: int = 4) -> tuple[GeometryOnlyInstance, list[int]]:
    """Random instance with a hidden feasible order.

    Elements collide only with elements at most ``window`` places away in the
    hidden order; each element's first candidate avoids everything printed
    before it, the rest are random decoys.
    """
    witness = [int(v) for v in rng.permutation(m)]
    position = {e: k for k, e in enumerate(witness)}
    trajectories = []
    for e in range(m):
        k = position[e]
        near = [witness[j] for j in range(max(0, k - window), min(m, k + window + 1)) if j != k]
        later = [o for o in near if position[o] > k]
        count = int(rng.integers(1, max_trajectories + 1))
        good = frozenset(o for o in later if rng.random() < 0.5)
        candidates = [good]
        for _ in range(count - 1):
            candidates.append(frozenset(o for o in near if rng.random() < 0.5))
        order = rng.permutation(count)
        trajectories.append(tuple(candidates[i] for i in order))
    return GeometryOnlyInstance(tuple(trajectories)), witness


def geometry_only_random(m: int, rng: np.random.Generator, max_trajectories: int = 3,
                         density: float = 0.5) -> GeometryOnlyInstance:
    trajectories = []
    for e in range(m):
        count = int(rng.integers(1, max_trajectories + 1))
        others = [o for o in range(m) if o != e]
        trajectories.append(tuple(frozenset(o for o in others if rng.random() < density) for _ in range(count)))
    return GeometryOnlyInstance(tuple(trajectories))


def geometry_only_brute_force(instance: GeometryOnlyInstance) -> list[int] | None:
    """Exhaustive search over build orders; returns a feasible order or ``None``."""
    m = instance.num_elements
    for order in itertools.permutations(range(m)):
        printed: set[int] = set()
        ok = True
        for e in order:
            if not any(not (blockers & printed) for blockers in instance.trajectories[e]):
                ok = False
                break
            printed.add(e)
        if ok:
            return list(order)
    return None


def geometry_only_from_sweeps(generated: Generated, rng: np.random.Generator, per_element: int = 3,
                              ) -> GeometryOnlyInstance:
    """Candidate sets recorded from real extrusion sweeps along the witness order.

    Each sampled extrusion is tested against every other element on its own,
    so its blocking set is exactly the elements its swept tool volume meets.
    """
    from .geometry import StaticBvh, tool_collides, trajectory_safe
    from .kinematics import FreeFlyingExtruder
    from .motion import sample_extrusion

    problem = generated.problem
    bvh = StaticBvh(problem)
    model = FreeFlyingExtruder.for_problem(problem)
    printed: set[int] = set()
    trajectories: dict[int, tuple[frozenset, ...]] = {}
    for step in generated.witness:
        e = step.element
        found = []
        for _ in range(per_element):
            traj = sample_extrusion(problem, bvh, model, e, printed, 2, rng)
            if traj is None:
                continue
            blockers = set()
            for other in range(problem.num_elements):
                if other == e:
                    continue
                single = {other}
                if (not trajectory_safe(problem, bvh, traj, single, ignore=e)
                        or tool_collides(problem, bvh, traj.start, single)
                        or tool_collides(problem, bvh, traj.end, single)):
                    blockers.add(other)
            found.append(frozenset(blockers))
        if not found:
            raise RuntimeError(f"no extrusion sampled for element {e} along the witness")
        trajectories[e] = tuple(found)
        printed.add(e)
    return GeometryOnlyInstance(tuple(trajectories[e] for e in range(problem.num_elements)))
