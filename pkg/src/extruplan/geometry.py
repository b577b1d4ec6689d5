"""Distances, capsule collision, the static element BVH and extrusion-orientation helpers.

Orientations are unit quaternions stored scalar-first ``(w, x, y, z)`` as numpy
arrays. The tool is a capsule from the tip along the tool's -z axis; printed
elements are capsules of the problem radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .frame import DirectedElement, FrameProblem

GROUND_TOL = 1e-9


# -- orientations -------------------------------------------------------------

def as_rotation(quat) -> Rotation:
    return Rotation.from_quat(np.asarray(quat, dtype=float), scalar_first=True)


def as_quat(rotation: Rotation) -> np.ndarray:
    quat = rotation.as_quat(scalar_first=True)
    # canonical sign keeps serialized plans stable
    if quat.ndim == 1:
        return -quat if quat[0] < 0 else quat
    flip = quat[:, 0] < 0
    quat[flip] *= -1
    return quat


def tool_axis(quat) -> np.ndarray:
    """World direction of the tool z-axis for one or many quaternions."""
    q = np.asarray(quat, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)], axis=-1)


def quat_angle(q1, q2) -> float:
    """Geodesic angle between two orientations (radians)."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if float(np.dot(q1, q2)) < 0:
        q2 = -q2
    # half-angle form stays accurate for nearly equal orientations
    return 4.0 * math.atan2(float(np.linalg.norm(q1 - q2)), float(np.linalg.norm(q1 + q2)))


def extrusion_direction(problem: FrameProblem, e: DirectedElement) -> np.ndarray:
    return problem.nodes[e.end] - problem.nodes[e.start]


def orientation_feasible(problem: FrameProblem, e: DirectedElement, quat) -> bool:
    """Whether the tool z-axis points against the extrusion direction (hemisphere test)."""
    return float(np.dot(extrusion_direction(problem, e), tool_axis(quat))) <= 0.0


def sample_orientation(problem: FrameProblem, e: DirectedElement, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the feasible hemisphere of orientations (rejection from SO(3))."""
    direction = extrusion_direction(problem, e)
    while True:
        quat = as_quat(Rotation.random(random_state=rng))
        if float(np.dot(direction, tool_axis(quat))) <= 0.0:
            return quat


def retraction_point(problem: FrameProblem, node: int, quat, distance: float | None = None) -> np.ndarray:
    """Tip position backed off from ``node`` by ``distance`` along the tool -z axis."""
    if distance is None:
        distance = problem.tolerances.retraction
    return problem.nodes[node] - distance * tool_axis(quat)


# -- distances ----------------------------------------------------------------

def segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Minimum distance between segments ``p0p1`` and ``q0q1`` (broadcasting over leading axes)."""
    p0, p1, q0, q1 = (np.asarray(v, dtype=float) for v in (p0, p1, q0, q1))
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    a, e, f, c, b = np.broadcast_arrays(a, e, f, c, b)
    tiny = 1e-300
    safe_a = np.where(a > tiny, a, 1.0)
    safe_e = np.where(e > tiny, e, 1.0)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / np.where(denom > 0, denom, 1.0), 0.0, 1.0), 0.0)
        t = (b * s + f) / safe_e
        s = np.where(t < 0.0, np.clip(-c / safe_a, 0.0, 1.0), s)
        s = np.where(t > 1.0, np.clip((b - c) / safe_a, 0.0, 1.0), s)
        t = np.clip(t, 0.0, 1.0)
    # degenerate segments
    q_point = e <= tiny
    s = np.where(q_point, np.clip(-c / safe_a, 0.0, 1.0), s)
    t = np.where(q_point, 0.0, t)
    p_point = a <= tiny
    t = np.where(p_point, np.clip(f / safe_e, 0.0, 1.0), t)
    s = np.where(p_point, 0.0, s)
    cp = p0 + s[..., None] * d1
    cq = q0 + t[..., None] * d2
    return np.linalg.norm(cp - cq, axis=-1)


def point_segment_distance(points, q0, q1) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    d = np.asarray(q1, dtype=float) - q0
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return np.linalg.norm(points - q0, axis=-1)
    t = np.clip((points - q0) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(points - (q0 + t[..., None] * d), axis=-1)


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def distance(self, other: Capsule) -> float:
        """Separation distance; zero when the capsules touch or overlap."""
        gap = float(segment_distance(self.p0, self.p1, other.p0, other.p1)) - self.radius - other.radius
        return max(0.0, gap)

    def intersects(self, other: Capsule) -> bool:
        return float(segment_distance(self.p0, self.p1, other.p0, other.p1)) <= self.radius + other.radius

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.minimum(self.p0, self.p1) - self.radius
        hi = np.maximum(self.p0, self.p1) + self.radius
        return lo, hi


def element_capsule(problem: FrameProblem, e: int) -> Capsule:
    p0, p1 = problem.element_points(e)
    return Capsule(p0.copy(), p1.copy(), problem.radius)


# -- BVH ----------------------------------------------------------------------

class StaticBvh:
    """Axis-aligned bounding box tree over every element capsule of a problem.

    Built once; queries filter by a printed-element mask.
    """

    LEAF_SIZE = 4

    def __init__(self, problem: FrameProblem):
        self.problem = problem
        m = problem.num_elements
        ends = np.array([problem.elements[e] for e in range(m)], dtype=int)
        self.starts = problem.nodes[ends[:, 0]].copy()
        self.ends = problem.nodes[ends[:, 1]].copy()
        r = problem.radius
        self.elem_lo = np.minimum(self.starts, self.ends) - r
        self.elem_hi = np.maximum(self.starts, self.ends) + r
        self.lo: list[np.ndarray] = []
        self.hi: list[np.ndarray] = []
        self.children: list[tuple[int, int] | None] = []
        self.leaf_items: list[np.ndarray | None] = []
        self._build(np.arange(m))
        self.box_lo = np.array(self.lo)
        self.box_hi = np.array(self.hi)

    def _build(self, items: np.ndarray) -> int:
        index = len(self.lo)
        self.lo.append(self.elem_lo[items].min(axis=0))
        self.hi.append(self.elem_hi[items].max(axis=0))
        self.children.append(None)
        self.leaf_items.append(None)
        if len(items) <= self.LEAF_SIZE:
            self.leaf_items[index] = items
            return index
        centers = 0.5 * (self.elem_lo[items] + self.elem_hi[items])
        axis = int(np.argmax(centers.max(axis=0) - centers.min(axis=0)))
        order = items[np.argsort(centers[:, axis], kind="stable")]
        half = len(order) // 2
        left = self._build(order[:half])
        right = self._build(order[half:])
        self.children[index] = (left, right)
        return index

    def __len__(self):
        return len(self.lo)

    def query(self, lo, hi, mask: np.ndarray | None = None) -> list[int]:
        """Element ids whose boxes overlap ``[lo, hi]`` (and are set in ``mask``)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out: list[int] = []
        stack = [0]
        box_lo, box_hi = self.box_lo, self.box_hi
        while stack:
            node = stack.pop()
            if np.any(box_lo[node] > hi) or np.any(box_hi[node] < lo):
                continue
            items = self.leaf_items[node]
            if items is None:
                stack.extend(self.children[node])
                continue
            for e in items:
                if mask is not None and not mask[e]:
                    continue
                if np.all(self.elem_lo[e] <= hi) and np.all(self.elem_hi[e] >= lo):
                    out.append(int(e))
        return out

    def contains_all(self) -> bool:
        """Every element box lies in its leaf box and all ancestor boxes."""
        def walk(node, ancestors):
            ancestors = ancestors + [node]
            items = self.leaf_items[node]
            if items is None:
                return all(walk(child, ancestors) for child in self.children[node])
            for e in items:
                for a in ancestors:
                    if np.any(self.elem_lo[e] < self.box_lo[a]) or np.any(self.elem_hi[e] > self.box_hi[a]):
                        return False
            return True
        return walk(0, [])


# -- tool collision -----------------------------------------------------------

def contact_trim(problem: FrameProblem) -> float:
    """Length trimmed off printed elements at the nodes of the element being extruded."""
    return 2.0 * (problem.tool.radius + problem.radius)


def collision_step(problem: FrameProblem) -> float:
    return min(problem.radius, problem.tool.radius) / 2.0


def _as_mask(problem: FrameProblem, printed) -> np.ndarray:
    if isinstance(printed, np.ndarray) and printed.dtype == bool:
        return printed
    mask = np.zeros(problem.num_elements, dtype=bool)
    idx = list(printed)
    if idx:
        mask[idx] = True
    return mask


def _environment_collision(problem: FrameProblem, tips: np.ndarray, tails: np.ndarray) -> bool:
    if min(tips[:, 2].min(), tails[:, 2].min()) < -GROUND_TOL:
        return True
    lo, hi = problem.workspace
    if np.any(tips < np.asarray(lo) - 1e-12) or np.any(tips > np.asarray(hi) + 1e-12):
        return True
    for box_lo, box_hi in problem.obstacles:
        if _segments_hit_box(tips, tails, np.asarray(box_lo) - problem.tool.radius,
                             np.asarray(box_hi) + problem.tool.radius):
            return True
    return False


def _segments_hit_box(p0: np.ndarray, p1: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    d = p1 - p0
    t0 = np.zeros(len(p0))
    t1 = np.ones(len(p0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis in range(3):
            inv = 1.0 / d[:, axis]
            a = (lo[axis] - p0[:, axis]) * inv
            b = (hi[axis] - p0[:, axis]) * inv
            near = np.where(np.isnan(a), -np.inf, np.minimum(a, b))
            far = np.where(np.isnan(b), np.inf, np.maximum(a, b))
            parallel = d[:, axis] == 0
            outside = parallel & ((p0[:, axis] < lo[axis]) | (p0[:, axis] > hi[axis]))
            near = np.where(parallel, -np.inf, near)
            far = np.where(parallel, np.inf, far)
            t0 = np.maximum(t0, near)
            t1 = np.minimum(t1, far)
            t1 = np.where(outside, -np.inf, t1)
    return bool(np.any(t0 <= t1))


def _element_segments(problem: FrameProblem, bvh: StaticBvh, candidates: list[int],
                      ignore: int | None) -> tuple[np.ndarray, np.ndarray]:
    starts = bvh.starts[candidates].copy()
    ends = bvh.ends[candidates].copy()
    if ignore is not None:
        trim = contact_trim(problem)
        shared = set(problem.elements[ignore])
        for k, e in enumerate(candidates):
            a, b = problem.elements[e]
            length = np.linalg.norm(ends[k] - starts[k])
            direction = (ends[k] - starts[k]) / length
            cut = min(trim, 0.5 * length)
            if a in shared:
                starts[k] = starts[k] + cut * direction
            if b in shared:
                ends[k] = ends[k] - cut * direction
    return starts, ends


def tools_collide(problem: FrameProblem, bvh: StaticBvh | None, tips: np.ndarray, quats: np.ndarray,
                  printed, ignore: int | None = None) -> bool:
    """Whether any of a batch of tool poses collides with the printed set or environment.

    With ``bvh=None`` every printed element is tested (brute force).
    """
    tips = np.atleast_2d(np.asarray(tips, dtype=float))
    quats = np.atleast_2d(np.asarray(quats, dtype=float))
    tails = tips - problem.tool.length * tool_axis(quats)
    if _environment_collision(problem, tips, tails):
        return True
    mask = _as_mask(problem, printed)
    if ignore is not None and mask[ignore]:
        mask = mask.copy()
        mask[ignore] = False
    reach = problem.tool.radius + problem.radius
    if bvh is None:
        candidates = [int(e) for e in np.flatnonzero(mask)]
    else:
        lo = np.minimum(tips.min(axis=0), tails.min(axis=0)) - problem.tool.radius
        hi = np.maximum(tips.max(axis=0), tails.max(axis=0)) + problem.tool.radius
        candidates = bvh.query(lo, hi, mask)
    if not candidates:
        return False
    if bvh is None:
        bvh_arrays = _BruteArrays(problem)
    else:
        bvh_arrays = bvh
    starts, ends = _element_segments(problem, bvh_arrays, candidates, ignore)
    dist = segment_distance(tips[:, None, :], tails[:, None, :], starts[None, :, :], ends[None, :, :])
    return bool(np.any(dist < reach))


class _BruteArrays:
    def __init__(self, problem: FrameProblem):
        ends = np.array(problem.elements, dtype=int)
        self.starts = problem.nodes[ends[:, 0]]
        self.ends = problem.nodes[ends[:, 1]]


def tool_collides(problem: FrameProblem, bvh: StaticBvh | None, q, printed, ignore: int | None = None) -> bool:
    """Collision test for a single configuration (anything with ``position``/``orientation``)."""
    return tools_collide(problem, bvh, np.asarray(q.position)[None], np.asarray(q.orientation)[None],
                         printed, ignore)


def discretize_segment(problem: FrameProblem, q_a, q_b, step: float | None = None):
    """Poses along the straight configuration-space segment ``q_a -> q_b``.

    Sample spacing keeps every point of the tool axis moving at most ``step``.
    """
    if step is None:
        step = collision_step(problem)
    pa, pb = np.asarray(q_a.position, dtype=float), np.asarray(q_b.position, dtype=float)
    oa, ob = np.asarray(q_a.orientation, dtype=float), np.asarray(q_b.orientation, dtype=float)
    angle = quat_angle(oa, ob)
    motion = float(np.linalg.norm(pb - pa)) + problem.tool.length * angle
    n = max(2, int(math.ceil(motion / step)) + 1)
    lam = np.linspace(0.0, 1.0, n)
    tips = pa[None, :] + lam[:, None] * (pb - pa)[None, :]
    if angle < 1e-12:
        quats = np.repeat(oa[None, :], n, axis=0)
    else:
        quats = slerp(oa, ob, lam)
    return tips, quats


def slerp(q0, q1, lam) -> np.ndarray:
    """Shortest-arc interpolation between two unit quaternions at parameters ``lam``."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.dot(q0, q1) < 0:
        q1 = -q1
    from scipy.spatial.transform import Slerp
    key = Rotation.from_quat(np.vstack([q0, q1]), scalar_first=True)
    out = Slerp([0.0, 1.0], key)(np.atleast_1d(lam)).as_quat(scalar_first=True)
    # keep the sign continuous with q0 so per-sample quaternions stay comparable
    flip = out @ q0 < 0
    out[flip] *= -1
    return out


def trajectory_safe(problem: FrameProblem, bvh: StaticBvh | None, trajectory, printed,
                    ignore: int | None = None, step: float | None = None) -> bool:
    """Conservative swept check of a piecewise-linear trajectory against the printed set.

    ``ignore`` names the element being extruded: it is excluded, and printed
    elements meeting its end nodes are trimmed near those nodes.
    """
    waypoints = trajectory.waypoints if hasattr(trajectory, "waypoints") else trajectory
    mask = _as_mask(problem, printed)
    if len(waypoints) == 1:
        return not tool_collides(problem, bvh, waypoints[0], mask, ignore)
    for q_a, q_b in zip(waypoints[:-1], waypoints[1:]):
        tips, quats = discretize_segment(problem, q_a, q_b, step)
        if tools_collide(problem, bvh, tips, quats, mask, ignore):
            return False
    return True
