"""Synthetic test meshes: cube, icosphere, planar grids, strips and fans.

These generators back the test suite, the demos and the FLOP-report command,
which all need meshes with known topology and face counts.
"""
from __future__ import annotations

import numpy as np

from .mesh import TriMesh, make_mesh


def unit_cube() -> TriMesh:
    """Triangulated axis-aligned unit cube: 8 vertices, 12 faces, closed manifold."""
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.float64,
    )
    quads = [
        (0, 3, 2, 1),  # z = 0, outward -z
        (4, 5, 6, 7),  # z = 1, outward +z
        (0, 1, 5, 4),  # y = 0
        (2, 3, 7, 6),  # y = 1
        (0, 4, 7, 3),  # x = 0
        (1, 2, 6, 5),  # x = 1
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return make_mesh(v, np.array(faces, dtype=np.int64))


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron: 20 * 4**subdivisions faces, watertight."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v / np.linalg.norm(v) for v in verts]

    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = midpoint_cache.get(key)
            if idx is None:
                m = verts[a] + verts[b]
                m = m / np.linalg.norm(m)
                verts.append(m)
                idx = len(verts) - 1
                midpoint_cache[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = new_faces

    v = np.array(verts, dtype=np.float64) * radius
    return make_mesh(v, np.array(faces, dtype=np.int64))


def grid_patch(
    nx: int,
    ny: int,
    height_fn=None,
    skew_fn=None,
    with_uvs: bool = False,
) -> TriMesh:
    """Triangulated planar [0,1]^2 grid: 2 * nx * ny faces.

    ``height_fn(x, y)`` displaces vertices along z; ``skew_fn(x, y)`` returns an
    in-plane (dx, dy) offset, useful for locally distorting triangle shapes.
    """
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    verts = []
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            px, py = x, y
            if skew_fn is not None and 0 < i < nx and 0 < j < ny:
                dx, dy = skew_fn(x, y)
                px, py = x + dx, y + dy
            z = height_fn(px, py) if height_fn is not None else 0.0
            verts.append((px, py, z))
    faces = []
    uvs = []
    p = np.array(verts, dtype=np.float64)[:, :2]
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
            if with_uvs:
                uvs.append([p[v00], p[v10], p[v11]])
                uvs.append([p[v00], p[v11], p[v01]])
    uv_arr = np.array(uvs, dtype=np.float64) if with_uvs else None
    return make_mesh(
        np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64), uvs=uv_arr
    )


def triangle_strip(n: int, spacing: float = 1.0) -> TriMesh:
    """Strip of n triangles between two rails; face i is adjacent to i-1 and i+1 only."""
    top = [(i * spacing, 1.0, 0.0) for i in range(n // 2 + 2)]
    bot = [(i * spacing + 0.5 * spacing, 0.0, 0.0) for i in range(n // 2 + 2)]
    verts = []
    for t, b in zip(top, bot):
        verts.append(t)
        verts.append(b)
    verts = verts[: n + 2]
    faces = []
    for i in range(n):
        a = i
        b = i + 1
        c = i + 2
        if i % 2 == 0:
            faces.append((a, b, c))
        else:
            faces.append((a, c, b))
    return make_mesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))


def vertex_fan(k: int = 3) -> TriMesh:
    """k triangles sharing only the apex vertex (no shared edges)."""
    verts = [(0.0, 0.0, 0.0)]
    faces = []
    for i in range(k):
        ang = 2.0 * np.pi * i / k
        # Each blade gets its own pair of rim vertices; blades touch only at the apex.
        verts.append((np.cos(ang), np.sin(ang), 1.0 + i))
        verts.append((np.cos(ang + 0.3), np.sin(ang + 0.3), 1.0 + i))
        faces.append((0, 2 * i + 1, 2 * i + 2))
    return make_mesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))
