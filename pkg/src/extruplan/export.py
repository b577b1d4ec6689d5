"""Static geometry export of a structure colored by extrusion order.

Elements are tessellated as capsules. The first printed element is purple,
the last red, with a linear ramp between; elements absent from the
sequence are black.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frame import FrameProblem

PURPLE = np.array([128, 0, 128], dtype=np.uint8)
RED = np.array([255, 0, 0], dtype=np.uint8)
BLACK = np.array([0, 0, 0], dtype=np.uint8)
FORMATS = ("ply", "json")


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (n, 3) float32
    colors: np.ndarray  # (n, 3) uint8
    faces: np.ndarray  # (f, 3) int32


def ramp(index: int, count: int) -> np.ndarray:
    t = 0.0 if count <= 1 else index / (count - 1)
    return np.rint((1.0 - t) * PURPLE + t * RED).astype(np.uint8)


def element_colors(problem: FrameProblem, sequence) -> np.ndarray:
    """Per-element RGB by position in ``sequence`` (element ids or directed elements)."""
    order = [int(getattr(e, "element", e)) for e in sequence]
    if len(set(order)) != len(order):
        raise ValueError("sequence repeats an element")
    colors = np.tile(BLACK, (problem.num_elements, 1))
    for index, e in enumerate(order):
        if not 0 <= e < problem.num_elements:
            raise ValueError(f"sequence names element {e}, which the problem does not have")
        colors[e] = ramp(index, len(order))
    return colors


def capsule_vertex_count(segments: int, rings: int) -> int:
    return 2 * (rings * segments + 1)


def _frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def capsule_mesh(a, b, radius: float, segments: int = 12, rings: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and triangles of a capsule around segment ``ab``.

    Each cap holds ``rings`` latitude rings of ``segments`` vertices and a
    pole; the two equator rings are joined by the cylinder wall.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    axis = b - a
    length = np.linalg.norm(axis)
    axis = axis / length if length > 0 else np.array([0.0, 0.0, 1.0])
    u, v = _frame(axis)
    phi = 2 * np.pi * np.arange(segments) / segments
    circle = np.outer(np.cos(phi), u) + np.outer(np.sin(phi), v)
    verts = []
    # cap at a: pole first, then rings toward the equator
    verts.append(a - radius * axis)
    for k in range(1, rings + 1):
        theta = 0.5 * np.pi * k / rings
        verts.extend(a - radius * np.cos(theta) * axis + radius * np.sin(theta) * circle)
    # cap at b: equator first, then rings toward the pole
    for k in range(rings, 0, -1):
        theta = 0.5 * np.pi * k / rings
        verts.extend(b + radius * np.cos(theta) * axis + radius * np.sin(theta) * circle)
    verts.append(b + radius * axis)
    verts = np.array(verts)

    faces = []
    last = len(verts) - 1

    def ring(j):
        return 1 + j * segments

    for s in range(segments):
        faces.append((0, ring(0) + (s + 1) % segments, ring(0) + s))
    for j in range(2 * rings - 1):
        for s in range(segments):
            p0, p1 = ring(j) + s, ring(j) + (s + 1) % segments
            q0, q1 = ring(j + 1) + s, ring(j + 1) + (s + 1) % segments
            faces.append((p0, p1, q1))
            faces.append((p0, q1, q0))
    top = ring(2 * rings - 1)
    for s in range(segments):
        faces.append((last, top + s, top + (s + 1) % segments))
    return verts, np.array(faces, dtype=np.int64)


def structure_mesh(problem: FrameProblem, sequence, segments: int = 12, rings: int = 3) -> Mesh:
    colors = element_colors(problem, sequence)
    all_verts, all_colors, all_faces = [], [], []
    offset = 0
    for e, (a, b) in enumerate(problem.elements):
        verts, faces = capsule_mesh(problem.nodes[a], problem.nodes[b], problem.radius, segments, rings)
        all_verts.append(verts)
        all_colors.append(np.tile(colors[e], (len(verts), 1)))
        all_faces.append(faces + offset)
        offset += len(verts)
    return Mesh(np.vstack(all_verts).astype(np.float32), np.vstack(all_colors).astype(np.uint8),
                np.vstack(all_faces).astype(np.int32))


def ply_bytes(mesh: Mesh) -> bytes:
    header = "\n".join([
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]) + "\n"
    vertex = np.empty(len(mesh.vertices), dtype=[("p", "<f4", 3), ("c", "u1", 3)])
    vertex["p"] = mesh.vertices
    vertex["c"] = mesh.colors
    face = np.empty(len(mesh.faces), dtype=[("n", "u1"), ("i", "<i4", 3)])
    face["n"] = 3
    face["i"] = mesh.faces
    return header.encode("ascii") + vertex.tobytes() + face.tobytes()


def scene_json(problem: FrameProblem, sequence) -> dict:
    colors = element_colors(problem, sequence)
    order = {int(getattr(e, "element", e)): k for k, e in enumerate(sequence)}
    return {
        "name": problem.name,
        "radius": problem.radius,
        "capsules": [
            {
                "element": e,
                "a": [float(x) for x in problem.nodes[a]],
                "b": [float(x) for x in problem.nodes[b]],
                "color": [int(c) for c in colors[e]],
                "order": order.get(e),
            }
            for e, (a, b) in enumerate(problem.elements)
        ],
    }


def export(problem: FrameProblem, sequence, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "ply":
        path.write_bytes(ply_bytes(structure_mesh(problem, sequence)))
    elif fmt == "json":
        path.write_text(json.dumps(scene_json(problem, sequence), indent=1) + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}; expected one of {', '.join(FORMATS)}")


def read_ply_header(data: bytes) -> dict[str, int]:
    """Element counts from a PLY header."""
    end = data.index(b"end_header\n")
    counts = {}
    for line in data[:end].decode("ascii").splitlines():
        parts = line.split()
        if parts and parts[0] == "element":
            counts[parts[1]] = int(parts[2])
    return counts

