"""Triangle mesh container, Wavefront OBJ I/O, and face adjacency.

The mesh is stored as flat numpy buffers (vertices, faces, optional per-corner
UVs, optional per-vertex colors) plus a per-face edge-adjacency table.  A mesh
is immutable after construction: the arrays are marked read-only so it can be
shared freely between pipeline stages.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateFaceError, MeshFormatError, UnsupportedTopologyError

# Faces with area at or below this are considered degenerate and dropped.
DEGENERATE_AREA_EPS = 1e-12


@dataclass
class LoadOptions:
    """Options controlling :func:`load_mesh`."""

    texture_path: str | Path | None = None  # explicit texture; default: sidecar <stem>.png
    load_texture: bool = True
    degenerate_area_eps: float = DEGENERATE_AREA_EPS


@dataclass
class FaceBasis:
    """Local frame of one triangular face.

    ``corners`` are the three vertex-minus-center offset vectors; they sum to
    zero by construction.  ``normal`` follows the right-hand rule on the stored
    vertex order.
    """

    center: np.ndarray  # (3,)
    normal: np.ndarray  # (3,) unit
    corners: np.ndarray  # (3, 3) vertex - center
    area: float


@dataclass
class TriMesh:
    """Indexed triangle mesh with per-face edge adjacency.

    Attributes:
        vertices: (V, 3) float64 positions.
        faces: (F, 3) int64 vertex indices, consistent stored winding.
        uvs: optional (F, 3, 2) per-face-corner UV coordinates in [0, 1].
        vertex_colors: optional (V, 3) RGB in [0, 1].
        adjacency: per-face arrays of edge-adjacent face indices.
        texture: optional decoded texture image (see :mod:`meshsal.texture`).
        dropped_degenerate: number of zero-area faces removed at build time.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uvs: np.ndarray | None = None
    vertex_colors: np.ndarray | None = None
    adjacency: list[np.ndarray] = field(default_factory=list)
    texture: object | None = None
    dropped_degenerate: int = 0

    # -- derived geometry (cached; the mesh is immutable) -------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_corner_positions(self) -> np.ndarray:
        """(F, 3, 3) positions of the three corners of every face."""
        cached = getattr(self, "_corners", None)
        if cached is None:
            cached = self.vertices[self.faces]
            cached.setflags(write=False)
            self._corners = cached
        return cached

    def face_centers(self) -> np.ndarray:
        cached = getattr(self, "_centers", None)
        if cached is None:
            cached = self.face_corner_positions().mean(axis=1)
            cached.setflags(write=False)
            self._centers = cached
        return cached

    def face_normals(self) -> np.ndarray:
        """(F, 3) unit normals, right-hand rule on stored vertex order."""
        cached = getattr(self, "_normals", None)
        if cached is None:
            tri = self.face_corner_positions()
            n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
            norms = np.linalg.norm(n, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            cached = n / norms
            cached.setflags(write=False)
            self._normals = cached
        return cached

    def face_areas(self) -> np.ndarray:
        cached = getattr(self, "_areas", None)
        if cached is None:
            tri = self.face_corner_positions()
            n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
            cached = 0.5 * np.linalg.norm(n, axis=1)
            cached.setflags(write=False)
            self._areas = cached
        return cached

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def face_basis(mesh: TriMesh, face: int) -> FaceBasis:
    """Center, unit normal, corner offsets and area of one face.

    Raises:
        DegenerateFaceError: if the face has (near-)zero area.
    """
    if not 0 <= face < mesh.n_faces:
        raise IndexError(f"face index {face} out of range for {mesh.n_faces} faces")
    tri = mesh.vertices[mesh.faces[face]]
    center = tri.mean(axis=0)
    cross = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    norm = float(np.linalg.norm(cross))
    area = 0.5 * norm
    if area <= DEGENERATE_AREA_EPS:
        raise DegenerateFaceError(f"face {face} is degenerate (area={area:g})")
    return FaceBasis(center=center, normal=cross / norm, corners=tri - center, area=area)


def build_adjacency(faces: np.ndarray, n_faces: int | None = None) -> list[np.ndarray]:
    """Edge-adjacency table: faces are adjacent iff they share an undirected edge.

    An edge shared by more than two faces triggers a non-manifold warning and
    all incident faces become mutually adjacent.  Faces sharing only a vertex
    are not adjacent.
    """
    if n_faces is None:
        n_faces = len(faces)
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for fi in range(n_faces):
        a, b, c = (int(v) for v in faces[fi])
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edge_faces.setdefault(key, []).append(fi)

    neighbor_sets: list[set[int]] = [set() for _ in range(n_faces)]
    non_manifold = 0
    for key, incident in edge_faces.items():
        if len(incident) > 2:
            non_manifold += 1
        for fi in incident:
            for fj in incident:
                if fi != fj:
                    neighbor_sets[fi].add(fj)
    if non_manifold:
        warnings.warn(
            f"{non_manifold} non-manifold edge(s): incident faces marked mutually adjacent",
            RuntimeWarning,
            stacklevel=2,
        )
    return [np.array(sorted(s), dtype=np.int64) for s in neighbor_sets]


def make_mesh(
    vertices: np.ndarray,
    faces: np.ndarray,
    uvs: np.ndarray | None = None,
    vertex_colors: np.ndarray | None = None,
    texture: object | None = None,
    degenerate_area_eps: float = DEGENERATE_AREA_EPS,
) -> TriMesh:
    """Validate buffers, drop degenerate faces, build adjacency, freeze arrays."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshFormatError(f"vertices must be (V, 3), got {vertices.shape}")
    if faces.size and (faces.ndim != 2 or faces.shape[1] != 3):
        raise UnsupportedTopologyError(f"faces must be (F, 3) triangles, got {faces.shape}")
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshFormatError("face index out of vertex range")

    # Degenerate = zero area, which covers repeated-vertex faces as well.
    tri = vertices[faces] if faces.size else np.zeros((0, 3, 3))
    areas = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
    )
    keep = areas > degenerate_area_eps
    dropped = int(np.count_nonzero(~keep))
    faces = faces[keep]
    if uvs is not None:
        uvs = np.ascontiguousarray(uvs, dtype=np.float64)[keep]
        # Repeat wrap mode: map coordinates into [0, 1).
        uvs = uvs - np.floor(uvs)
        uvs.setflags(write=False)
    if vertex_colors is not None:
        vertex_colors = np.ascontiguousarray(vertex_colors, dtype=np.float64)
        vertex_colors.setflags(write=False)

    adjacency = build_adjacency(faces)
    vertices.setflags(write=False)
    faces.setflags(write=False)
    return TriMesh(
        vertices=vertices,
        faces=faces,
        uvs=uvs,
        vertex_colors=vertex_colors,
        adjacency=adjacency,
        texture=texture,
        dropped_degenerate=dropped,
    )


# -- Wavefront OBJ ----------------------------------------------------------


def _parse_face_token(token: str, n_vertices: int, n_uvs: int, line_no: int) -> tuple[int, int | None]:
    parts = token.split("/")
    try:
        vi = int(parts[0])
        ti = int(parts[1]) if len(parts) > 1 and parts[1] != "" else None
    except ValueError as exc:
        raise MeshFormatError(f"line {line_no}: bad face token {token!r}") from exc
    vi = vi - 1 if vi > 0 else n_vertices + vi
    if ti is not None:
        ti = ti - 1 if ti > 0 else n_uvs + ti
    return vi, ti


def load_mesh(path: str | Path, options: LoadOptions | None = None) -> TriMesh:
    """Load a triangulated Wavefront OBJ file.

    Supports ``v`` (with the optional vertex-color extension), ``vt`` and ``f``
    records.  Non-triangle faces raise :class:`UnsupportedTopologyError`;
    malformed records raise :class:`MeshFormatError` with the line number.
    Zero-area faces are dropped and counted in ``dropped_degenerate``.
    """
    options = options or LoadOptions()
    path = Path(path)
    verts: list[list[float]] = []
    colors: list[list[float]] = []
    uv_pool: list[list[float]] = []
    tri_v: list[list[int]] = []
    tri_t: list[list[int | None]] = []

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            tag = fields[0]
            try:
                if tag == "v":
                    if len(fields) not in (4, 7):
                        raise MeshFormatError(f"line {line_no}: 'v' needs 3 or 6 floats")
                    verts.append([float(x) for x in fields[1:4]])
                    if len(fields) == 7:
                        colors.append([float(x) for x in fields[4:7]])
                elif tag == "vt":
                    if len(fields) < 3:
                        raise MeshFormatError(f"line {line_no}: 'vt' needs 2 floats")
                    uv_pool.append([float(fields[1]), float(fields[2])])
                elif tag == "f":
                    corners = fields[1:]
                    if len(corners) != 3:
                        raise UnsupportedTopologyError(
                            f"line {line_no}: face with {len(corners)} corners; only triangles supported"
                        )
                    parsed = [
                        _parse_face_token(tok, len(verts), len(uv_pool), line_no)
                        for tok in corners
                    ]
                    tri_v.append([p[0] for p in parsed])
                    tri_t.append([p[1] for p in parsed])
                # Other record types (vn, usemtl, mtllib, o, g, s) are ignored.
            except ValueError as exc:
                raise MeshFormatError(f"line {line_no}: {exc}") from exc

    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    faces = np.array(tri_v, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshFormatError("face references a vertex that does not exist")

    uvs = None
    if uv_pool and any(t[0] is not None for t in tri_t):
        uv_arr = np.array(uv_pool, dtype=np.float64)
        uvs = np.zeros((len(faces), 3, 2), dtype=np.float64)
        for fi, tids in enumerate(tri_t):
            for ci, ti in enumerate(tids):
                if ti is None:
                    raise MeshFormatError(f"face {fi}: mixed textured/untextured corners")
                if not 0 <= ti < len(uv_arr):
                    raise MeshFormatError(f"face {fi}: uv index out of range")
                uvs[fi, ci] = uv_arr[ti]

    vertex_colors = None
    if colors:
        if len(colors) != len(verts):
            raise MeshFormatError("vertex colors present on some but not all vertices")
        vertex_colors = np.array(colors, dtype=np.float64)

    texture = None
    if uvs is not None and options.load_texture:
        tex_path = Path(options.texture_path) if options.texture_path else path.with_suffix(".png")
        if tex_path.exists():
            from .texture import TextureImage

            texture = TextureImage.from_png(tex_path)
        else:
            warnings.warn(
                f"mesh has UVs but no texture found at {tex_path}; continuing without texture",
                RuntimeWarning,
                stacklevel=2,
            )

    return make_mesh(
        vertices,
        faces,
        uvs=uvs,
        vertex_colors=vertex_colors,
        texture=texture,
        degenerate_area_eps=options.degenerate_area_eps,
    )


def save_mesh(mesh: TriMesh, path: str | Path) -> None:
    """Write OBJ with full float64 precision (%.17g round-trips exactly)."""
    path = Path(path)
    lines: list[str] = []
    if mesh.vertex_colors is not None:
        for v, c in zip(mesh.vertices, mesh.vertex_colors):
            lines.append(
                "v %.17g %.17g %.17g %.17g %.17g %.17g" % (v[0], v[1], v[2], c[0], c[1], c[2])
            )
    else:
        for v in mesh.vertices:
            lines.append("v %.17g %.17g %.17g" % (v[0], v[1], v[2]))
    if mesh.uvs is not None:
        for fi in range(mesh.n_faces):
            for ci in range(3):
                u, w = mesh.uvs[fi, ci]
                lines.append("vt %.17g %.17g" % (u, w))
        for fi, f in enumerate(mesh.faces):
            t = 3 * fi
            lines.append(f"f {f[0]+1}/{t+1} {f[1]+1}/{t+2} {f[2]+1}/{t+3}")
    else:
        for f in mesh.faces:
            lines.append(f"f {f[0]+1} {f[1]+1} {f[2]+1}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
