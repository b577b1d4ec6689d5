"""Random and hand-built problems shared by the tests."""
from __future__ import annotations

import numpy as np

from extruplan.frame import FrameProblem, MaterialSpec, ToleranceSpec

UNIT = MaterialSpec(E=1.0, G=1.0, density=1.0, area=1.0, Iy=1.0, Iz=1.0, J=1.0, g=1.0)
DOWN = [0.0, 1.0, 0.0, 0.0]


def make_problem(nodes, elements, ground, material: MaterialSpec | None = None, trans: float = 1.0,
                 radius: float = 0.002, **kwargs) -> FrameProblem:
    nodes = np.asarray(nodes, dtype=float)
    top = float(nodes[:, 2].max())
    center = nodes.mean(axis=0)
    q0 = kwargs.pop("q0", {"position": [float(center[0]), float(center[1]), top + 0.08], "orientation": DOWN})
    return FrameProblem(nodes=nodes, elements=tuple(map(tuple, elements)), ground=frozenset(ground),
                        material=material or MaterialSpec.circular(radius, E=3.5e9, G=1.3e9, density=1240.0),
                        radius=radius, q0=q0,
                        tolerances=ToleranceSpec(trans=trans, eps=1e-6, retraction=0.01), **kwargs)


def random_material(rng: np.random.Generator) -> MaterialSpec:
    """Rectangular-ish section so that the two bending stiffnesses differ."""
    return MaterialSpec(E=float(rng.uniform(1e9, 5e9)), G=float(rng.uniform(0.5e9, 2e9)),
                        density=float(rng.uniform(800, 2000)), area=float(rng.uniform(5e-6, 2e-5)),
                        Iy=float(rng.uniform(1e-12, 5e-11)), Iz=float(rng.uniform(1e-12, 5e-11)),
                        J=float(rng.uniform(1e-12, 5e-11)))


def random_frame(rng: np.random.Generator, max_elements: int = 30, scale: float = 0.05) -> FrameProblem:
    """Random ground-connected frame: a tree grown from ground nodes plus extra chords."""
    target = int(rng.integers(3, max_elements + 1))
    num_ground = int(rng.integers(1, 4))
    nodes = [np.array([rng.uniform(-2, 2) * scale, rng.uniform(-2, 2) * scale, 0.0]) for _ in range(num_ground)]
    elements: list[tuple[int, int]] = []
    pairs = set()
    for _ in range(1000):
        if len(elements) >= target:
            break
        if rng.random() < 0.6 or len(nodes) < num_ground + 2:
            # new node hanging off an existing one keeps the frame connected
            parent = int(rng.integers(len(nodes)))
            step = rng.normal(size=3)
            step[2] = abs(step[2]) + 0.3
            nodes.append(nodes[parent] + scale * step / np.linalg.norm(step))
            a, b = parent, len(nodes) - 1
        else:
            a, b = (int(v) for v in rng.choice(len(nodes), size=2, replace=False))
            if (a < num_ground and b < num_ground) or np.linalg.norm(nodes[a] - nodes[b]) < 0.2 * scale:
                continue
        key = (min(a, b), max(a, b))
        if key not in pairs:
            pairs.add(key)
            elements.append((a, b))
    used = sorted({v for e in elements for v in e} | set(range(num_ground)))
    remap = {v: k for k, v in enumerate(used)}
    nodes = [nodes[v] for v in used]
    elements = [(remap[a], remap[b]) for a, b in elements]
    return make_problem(nodes, elements, range(num_ground), material=random_material(rng))


def random_graph(rng: np.random.Generator, max_nodes: int = 50) -> FrameProblem:
    """Random connected geometric graph with several ground nodes, for distance heuristics."""
    n = int(rng.integers(4, max_nodes + 1))
    nodes = rng.uniform(0.0, 0.3, size=(n, 3))
    num_ground = int(rng.integers(1, min(4, n - 1) + 1))
    nodes[:num_ground, 2] = 0.0
    elements = []
    pairs = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        elements.append((u, v))
        pairs.add((u, v))
    for _ in range(int(rng.integers(0, 2 * n))):
        a, b = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
        if (a, b) not in pairs:
            pairs.add((a, b))
            elements.append((a, b))
    return make_problem(nodes, elements, range(num_ground))


def column(n: int = 1, length: float = 1.0, material: MaterialSpec = UNIT) -> FrameProblem:
    nodes = [(0.0, 0.0, k * length) for k in range(n + 1)]
    return make_problem(nodes, [(k, k + 1) for k in range(n)], [0], material=material, trans=10.0)
