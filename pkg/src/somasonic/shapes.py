"""Procedural meshes for fixtures and demo scenes."""

from __future__ import annotations

import numpy as np

from .geometry import TriMesh, build_mesh


def box(
    size=(1.0, 1.0, 1.0),
    center=(0.0, 0.0, 0.0),
    structure_id: str = "box",
    quads: bool = True,
) -> TriMesh:
    """Axis-aligned box; quad faces by default (triangulated on build)."""
    sx, sy, sz = (s / 2.0 for s in size)
    cx, cy, cz = center
    v = np.array(
        [
            [cx - sx, cy - sy, cz - sz],
            [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz],
            [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz],
            [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz],
            [cx - sx, cy + sy, cz + sz],
        ]
    )
    faces = [
        [0, 3, 2, 1],  # bottom (outward -z)
        [4, 5, 6, 7],  # top
        [0, 1, 5, 4],  # front
        [1, 2, 6, 5],  # right
        [2, 3, 7, 6],  # back
        [3, 0, 4, 7],  # left
    ]
    if not quads:
        faces = [[f[0], f[1], f[2]] for f in faces] + [[f[0], f[2], f[3]] for f in faces]
    return build_mesh(v, faces, structure_id)


def icosphere(
    radius: float = 1.0,
    subdivisions: int = 2,
    center=(0.0, 0.0, 0.0),
    structure_id: str = "sphere",
) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron (closed, convex)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(verts, faces, structure_id=structure_id)


def _subdivide(verts: np.ndarray, faces: np.ndarray):
    midpoint_cache: dict[tuple[int, int], int] = {}
    new_verts = [v for v in verts]
    new_faces = []

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in midpoint_cache:
            new_verts.append((verts[a] + verts[b]) / 2.0)
            midpoint_cache[key] = len(new_verts) - 1
        return midpoint_cache[key]

    for a, b, c in faces:
        ab = midpoint(a, b)
        bc = midpoint(b, c)
        ca = midpoint(c, a)
        new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.asarray(new_verts), np.asarray(new_faces, dtype=np.int64)


def tube(
    radius: float = 0.01,
    length: float = 0.2,
    segments: int = 12,
    rings: int = 8,
    center=(0.0, 0.0, 0.0),
    structure_id: str = "tube",
) -> TriMesh:
    """Closed capped cylinder along z, quad side faces."""
    cx, cy, cz = center
    zs = np.linspace(cz - length / 2, cz + length / 2, rings + 1)
    ang = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    ring_pts = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    verts = []
    for z in zs:
        for x, y in ring_pts:
            verts.append([cx + x, cy + y, z])
    bottom_c = len(verts)
    verts.append([cx, cy, zs[0]])
    top_c = len(verts)
    verts.append([cx, cy, zs[-1]])
    faces: list[list[int]] = []
    for r in range(rings):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            c = (r + 1) * segments + (s + 1) % segments
            d = (r + 1) * segments + s
            faces.append([a, b, c, d])
    for s in range(segments):
        faces.append([bottom_c, (s + 1) % segments, s])
        top0 = rings * segments
        faces.append([top_c, top0 + s, top0 + (s + 1) % segments])
    return build_mesh(np.asarray(verts), faces, structure_id)
