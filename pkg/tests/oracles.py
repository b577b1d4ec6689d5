"""Reference implementations written independently of the library code paths."""
from __future__ import annotations

import itertools
import math

import numpy as np

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(4)


def _hermite_second(xi: float, length: float) -> np.ndarray:
    """Second derivatives (d2/dx2) of the four cubic Hermite functions at xi in [0, 1]."""
    L = length
    return np.array([
        (-6 + 12 * xi) / L**2,
        (-4 + 6 * xi) / L,
        (6 - 12 * xi) / L**2,
        (-2 + 6 * xi) / L,
    ])


def _hermite(xi: float, length: float) -> np.ndarray:
    L = length
    return np.array([
        1 - 3 * xi**2 + 2 * xi**3,
        L * (xi - 2 * xi**2 + xi**3),
        3 * xi**2 - 2 * xi**3,
        L * (-xi**2 + xi**3),
    ])


def _quadrature(fn, length: float) -> np.ndarray:
    total = None
    for x, w in zip(GAUSS_X, GAUSS_W):
        xi = 0.5 * (x + 1.0)
        value = fn(xi) * (0.5 * w * length)
        total = value if total is None else total + value
    return total


def local_matrix(length: float, E, G, A, Iy, Iz, J) -> np.ndarray:
    """Element stiffness from shape-function integration.

    Local DOF order per node: u, v, w, tx, ty, tz. Deflection v pairs with
    tz = dv/dx; deflection w pairs with ty = -dw/dx.
    """
    k = np.zeros((12, 12))
    bar = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for dof, coeff in ((0, E * A), (3, G * J)):
        idx = [dof, dof + 6]
        k[np.ix_(idx, idx)] += coeff / length * bar
    # bending with v, tz
    b = _quadrature(lambda xi: np.outer(_hermite_second(xi, length), _hermite_second(xi, length)), length)
    idx = [1, 5, 7, 11]
    k[np.ix_(idx, idx)] += E * Iz * b
    # bending with w, ty: ty = -dw/dx flips the rotational shape functions
    sign = np.diag([1.0, -1.0, 1.0, -1.0])
    idx = [2, 4, 8, 10]
    k[np.ix_(idx, idx)] += E * Iy * sign @ b @ sign
    return k


def local_load(length: float, q_v: float, q_w: float) -> np.ndarray:
    """Consistent nodal loads for uniform transverse loads q_v (along y) and q_w (along z)."""
    n = _quadrature(lambda xi: _hermite(xi, length), length)
    f = np.zeros(12)
    f[[1, 5, 7, 11]] += q_v * n
    f[[2, 4, 8, 10]] += q_w * (np.diag([1.0, -1.0, 1.0, -1.0]) @ n)
    return f


def frame_axes(p0, p1) -> np.ndarray:
    d = np.asarray(p1, float) - np.asarray(p0, float)
    x = d / math.sqrt(float(d @ d))
    up = np.array([0.0, 0.0, 1.0])
    if abs(x[2]) > 1.0 - 1e-8:
        up = np.array([0.0, 1.0, 0.0])
    y = np.array([up[1] * x[2] - up[2] * x[1], up[2] * x[0] - up[0] * x[2], up[0] * x[1] - up[1] * x[0]])
    y = y / math.sqrt(float(y @ y))
    z = np.array([x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]])
    return np.array([x, y, z])


def dense_displacements(nodes, elements, ground, material: dict, printed) -> np.ndarray:
    """Nodal displacements (n, 6) of the printed elements under self-weight, dense solve."""
    nodes = np.asarray(nodes, float)
    n = len(nodes)
    K = np.zeros((6 * n, 6 * n))
    F = np.zeros(6 * n)
    w = material["density"] * material["area"] * material["g"]
    for e in printed:
        a, b = elements[e]
        length = float(np.linalg.norm(nodes[b] - nodes[a]))
        R = frame_axes(nodes[a], nodes[b])
        T = np.kron(np.eye(4), R)
        k_local = local_matrix(length, material["E"], material["G"], material["area"],
                               material["Iy"], material["Iz"], material["J"])
        gravity_local = R @ np.array([0.0, 0.0, -w])
        f_local = local_load(length, gravity_local[1], gravity_local[2])
        f_global = T.T @ f_local
        # forces: half the weight straight down at each end; moments stay consistent
        f_global[[0, 1, 2, 6, 7, 8]] = 0.0
        f_global[2] -= 0.5 * w * length
        f_global[8] -= 0.5 * w * length
        dofs = [6 * a + i for i in range(6)] + [6 * b + i for i in range(6)]
        K[np.ix_(dofs, dofs)] += T.T @ k_local @ T
        F[dofs] += f_global
    active = sorted({v for e in printed for v in elements[e]} - set(ground))
    free = [6 * v + i for v in active for i in range(6)]
    u = np.zeros(6 * n)
    if free:
        u[free] = np.linalg.solve(K[np.ix_(free, free)], F[free])
    return u.reshape(n, 6)


def floyd_warshall(num_nodes: int, edges) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest paths with successor matrix; edges are (a, b, weight), undirected."""
    dist = np.full((num_nodes, num_nodes), math.inf)
    nxt = -np.ones((num_nodes, num_nodes), dtype=int)
    for v in range(num_nodes):
        dist[v, v] = 0.0
        nxt[v, v] = v
    for a, b, weight in edges:
        if weight < dist[a, b]:
            dist[a, b] = dist[b, a] = weight
            nxt[a, b], nxt[b, a] = b, a
    for k in range(num_nodes):
        for i in range(num_nodes):
            for j in range(num_nodes):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
                    nxt[i, j] = nxt[i, k]
    return dist, nxt


def ground_distances(num_nodes: int, edges, ground) -> list[float]:
    """Shortest distance from any ground node, summed edge by edge outward from the source."""
    dist, nxt = floyd_warshall(num_nodes, edges)
    weight = {}
    for a, b, w in edges:
        weight[a, b] = weight[b, a] = min(w, weight.get((a, b), math.inf))
    out = []
    for v in range(num_nodes):
        best = math.inf
        for g in ground:
            if math.isinf(dist[g, v]):
                continue
            total, cur = 0.0, g
            while cur != v:
                step = nxt[cur, v]
                total += weight[cur, step]
                cur = step
            best = min(best, total)
        out.append(best)
    return out


def geometry_only_feasible_order(trajectories) -> list[int] | None:
    """Try every build order; an element needs one candidate whose blockers are all unprinted."""
    m = len(trajectories)
    for order in itertools.permutations(range(m)):
        printed = set()
        for e in order:
            if all(blockers & printed for blockers in trajectories[e]):
                break
            printed.add(e)
        else:
            return list(order)
    return None


def segment_segment_distance(p0, p1, q0, q1) -> float:
    """Closest distance between two segments: interior critical point plus all endpoint cases."""
    p0, p1, q0, q1 = (np.asarray(v, float) for v in (p0, p1, q0, q1))
    d1, d2 = p1 - p0, q1 - q0

    def point_seg(p, a, b):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
        return float(np.linalg.norm(p - (a + t * ab)))

    best = min(point_seg(p0, q0, q1), point_seg(p1, q0, q1), point_seg(q0, p0, p1), point_seg(q1, p0, p1))
    a, b, c = float(d1 @ d1), float(d1 @ d2), float(d2 @ d2)
    r = p0 - q0
    d, e = float(d1 @ r), float(d2 @ r)
    denom = a * c - b * b
    if denom > 1e-18 * a * c:
        s = (b * e - c * d) / denom
        t = (a * e - b * d) / denom
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            best = min(best, float(np.linalg.norm(p0 + s * d1 - q0 - t * d2)))
    return best
