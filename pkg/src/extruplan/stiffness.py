"""Linear 3D frame analysis under self-weight and the stiffness predicate.

Each node carries six DOFs ``(ux, uy, uz, rx, ry, rz)`` in the global frame.
Elements are Euler-Bernoulli beams; self-weight is lumped as half the element
weight at each end plus the fixed-end moments of a uniformly loaded beam.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .frame import FrameProblem, MaterialSpec, grounded_elements

DOF = 6
RESIDUAL_TOL = 1e-8
_VERTICAL_COS = 1.0 - 1e-8


class NotGroundedError(ValueError):
    pass


def local_frame(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Rotation whose rows are the element's local x, y, z axes in global coordinates.

    The reference vector is global z, switching to global y for (near) vertical
    elements.
    """
    axis = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
    length = np.linalg.norm(axis)
    if length == 0.0:
        raise ValueError("degenerate element of zero length")
    x = axis / length
    ref = np.array([0.0, 1.0, 0.0]) if abs(x[2]) > _VERTICAL_COS else np.array([0.0, 0.0, 1.0])
    y = np.cross(ref, x)
    y /= np.linalg.norm(y)
    z = np.cross(x, y)
    return np.vstack([x, y, z])


def local_stiffness(length: float, material: MaterialSpec) -> np.ndarray:
    L = length
    E, G = material.E, material.G
    A, Iy, Iz, J = material.area, material.Iy, material.Iz, material.J
    k = np.zeros((12, 12))
    ea = E * A / L
    gj = G * J / L
    k[0, 0] = k[6, 6] = ea
    k[0, 6] = k[6, 0] = -ea
    k[3, 3] = k[9, 9] = gj
    k[3, 9] = k[9, 3] = -gj

    # bending in the local xy plane (about z)
    a, b, c, d = 12 * E * Iz / L**3, 6 * E * Iz / L**2, 4 * E * Iz / L, 2 * E * Iz / L
    k[1, 1] = k[7, 7] = a
    k[1, 7] = k[7, 1] = -a
    k[1, 5] = k[5, 1] = k[1, 11] = k[11, 1] = b
    k[7, 5] = k[5, 7] = k[7, 11] = k[11, 7] = -b
    k[5, 5] = k[11, 11] = c
    k[5, 11] = k[11, 5] = d

    # bending in the local xz plane (about y)
    a, b, c, d = 12 * E * Iy / L**3, 6 * E * Iy / L**2, 4 * E * Iy / L, 2 * E * Iy / L
    k[2, 2] = k[8, 8] = a
    k[2, 8] = k[8, 2] = -a
    k[2, 4] = k[4, 2] = k[2, 10] = k[10, 2] = -b
    k[8, 4] = k[4, 8] = k[8, 10] = k[10, 8] = b
    k[4, 4] = k[10, 10] = c
    k[4, 10] = k[10, 4] = d
    return k


def _expand(rotation: np.ndarray) -> np.ndarray:
    t = np.zeros((12, 12))
    for i in range(4):
        t[3 * i:3 * i + 3, 3 * i:3 * i + 3] = rotation
    return t


def element_stiffness(problem: FrameProblem, e: int) -> np.ndarray:
    """12x12 global-frame stiffness of element ``e`` (DOFs of start node then end node)."""
    p0, p1 = problem.element_points(e)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0:
        raise ValueError(f"element {e} has zero length")
    t = _expand(local_frame(p0, p1))
    k = t.T @ local_stiffness(length, problem.material) @ t
    return 0.5 * (k + k.T)


def element_self_weight(problem: FrameProblem, e: int) -> np.ndarray:
    """12-vector of equivalent global nodal loads for the element's self-weight."""
    p0, p1 = problem.element_points(e)
    length = float(np.linalg.norm(p1 - p0))
    mat = problem.material
    w = mat.density * mat.area * mat.g
    rotation = local_frame(p0, p1)
    q_local = rotation @ np.array([0.0, 0.0, -w])
    f = np.zeros(12)
    f[2] = f[8] = -0.5 * w * length
    moments = np.zeros(12)
    # fixed-end moments for the transverse load components (local frame)
    moments[5] = q_local[1] * length**2 / 12.0
    moments[11] = -q_local[1] * length**2 / 12.0
    moments[4] = -q_local[2] * length**2 / 12.0
    moments[10] = q_local[2] * length**2 / 12.0
    return f + _expand(rotation).T @ moments


@dataclass
class GlobalSystem:
    """Assembled system restricted to the nodes touched by the printed set."""

    K: sp.csr_matrix
    F: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    num_nodes: int

    @property
    def K_ff(self):
        return self.K[self.free][:, self.free]

    @property
    def F_f(self):
        return self.F[self.free]


@dataclass
class DeformationReport:
    displacements: np.ndarray
    max_trans: float
    max_rot: float
    worst_node: int | None
    worst_rot_node: int | None
    passed: bool = False
    residual: float = 0.0
    diagnosis: str | None = None

    def to_json(self) -> dict:
        return {
            "pass": bool(self.passed),
            "max_trans": float(self.max_trans),
            "max_rot": float(self.max_rot),
            "worst_node": self.worst_node,
            "displacements": [[float(v) for v in row] for row in self.displacements],
            **({"diagnosis": self.diagnosis} if self.diagnosis else {}),
        }


def _element_arrays(problem: FrameProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-element global stiffness, self-weight and DOF indices, computed once per problem."""
    cached = problem.__dict__.get("_element_arrays")
    if cached is None:
        m = problem.num_elements
        stiffness = np.empty((m, 12, 12))
        weight = np.empty((m, 12))
        dofs = np.empty((m, 12), dtype=np.int64)
        for e, (a, b) in enumerate(problem.elements):
            stiffness[e] = element_stiffness(problem, e)
            weight[e] = element_self_weight(problem, e)
            dofs[e] = np.r_[DOF * a:DOF * a + DOF, DOF * b:DOF * b + DOF]
        cached = (stiffness, weight, dofs)
        object.__setattr__(problem, "_element_arrays", cached)
    return cached


def assemble(problem: FrameProblem, printed: Iterable[int], loads: np.ndarray | None = None) -> GlobalSystem:
    """Assemble stiffness and self-weight load over the printed elements.

    ``loads`` optionally replaces the self-weight vector (length ``6*num_nodes``).
    """
    printed = sorted(set(printed))
    if len(grounded_elements(problem, printed)) != len(printed):
        raise NotGroundedError("printed structure is not connected to ground")
    n = problem.num_nodes
    stiffness, weight, dofs = _element_arrays(problem)
    idx = np.array(printed, dtype=np.int64)
    F = np.zeros(DOF * n)
    if loads is None:
        np.add.at(F, dofs[idx].ravel(), weight[idx].ravel())
    else:
        F = np.asarray(loads, dtype=float).copy()
    if printed:
        d = dofs[idx]
        rows = np.repeat(d, 12, axis=1).ravel()
        cols = np.tile(d, (1, 12)).ravel()
        K = sp.coo_matrix((stiffness[idx].ravel(), (rows, cols)), shape=(DOF * n, DOF * n)).tocsr()
    else:
        K = sp.csr_matrix((DOF * n, DOF * n))
    active = {v for e in printed for v in problem.elements[e]}
    free_nodes = sorted(active - problem.ground)
    free = np.array([DOF * v + i for v in free_nodes for i in range(DOF)], dtype=int)
    fixed = np.array([DOF * g + i for g in sorted(problem.ground) for i in range(DOF)], dtype=int)
    return GlobalSystem(K=K, F=F, free=free, fixed=fixed, num_nodes=n)


def solve(system: GlobalSystem) -> DeformationReport:
    """Solve ``K_ff u_f = F_f`` with a sparse symmetric factorization.

    Raises ``np.linalg.LinAlgError`` when ``K_ff`` is not positive definite or
    the residual check fails.
    """
    n = system.num_nodes
    u = np.zeros(DOF * n)
    residual = 0.0
    if system.free.size:
        K_ff = system.K_ff.tocsc()
        F_f = system.F_f
        try:
            lu = spla.splu(K_ff, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(f"singular stiffness matrix: {exc}") from exc
        pivots = lu.U.diagonal()
        if not np.all(pivots > 0):
            raise np.linalg.LinAlgError("stiffness matrix is not positive definite")
        u_f = lu.solve(F_f)
        norm_f = np.linalg.norm(F_f)
        if norm_f > 0:
            residual = float(np.linalg.norm(K_ff @ u_f - F_f) / norm_f)
            if not residual <= RESIDUAL_TOL:
                raise np.linalg.LinAlgError(f"residual {residual:.3g} exceeds {RESIDUAL_TOL}")
        u[system.free] = u_f
    disp = u.reshape(n, DOF)
    trans = np.linalg.norm(disp[:, :3], axis=1)
    rot = np.linalg.norm(disp[:, 3:], axis=1)
    worst = int(np.argmax(trans)) if system.free.size else None
    worst_rot = int(np.argmax(rot)) if system.free.size else None
    return DeformationReport(
        displacements=disp,
        max_trans=float(trans.max()) if n else 0.0,
        max_rot=float(rot.max()) if n else 0.0,
        worst_node=worst,
        worst_rot_node=worst_rot,
        residual=residual,
    )


def analyze(problem: FrameProblem, printed: Iterable[int]) -> DeformationReport:
    """Assemble, solve and grade a printed set against the problem tolerances."""
    printed = frozenset(printed)
    n = problem.num_nodes
    try:
        report = solve(assemble(problem, printed))
    except NotGroundedError:
        return DeformationReport(np.zeros((n, DOF)), math.inf, math.inf, None, None,
                                 passed=False, diagnosis="not_grounded")
    except np.linalg.LinAlgError as exc:
        return DeformationReport(np.zeros((n, DOF)), math.inf, math.inf, None, None,
                                 passed=False, diagnosis=f"singular: {exc}")
    tol = problem.tolerances
    report.passed = report.max_trans <= tol.trans and report.max_rot <= tol.rot
    if not report.passed:
        report.diagnosis = "tolerance"
    return report


def stiff(problem: FrameProblem, printed: Iterable[int]) -> bool:
    printed = frozenset(printed)
    if not printed:
        return True
    return analyze(problem, printed).passed


@dataclass
class StiffnessChecker:
    """Memoized stiffness predicate keyed by the printed element set.

    Calls are safe from several threads; the cache is guarded by a lock.
    """

    problem: FrameProblem
    cache: dict = field(default_factory=dict)
    checks: int = 0
    hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, printed: Iterable[int]) -> bool:
        key = frozenset(printed)
        with self._lock:
            if key in self.cache:
                self.hits += 1
                return self.cache[key]
        result = stiff(self.problem, key)
        with self._lock:
            self.checks += 1
            self.cache[key] = result
        return result
