"""Quadric-error-metric edge-collapse simplification with saliency guidance.

Each vertex accumulates the fundamental quadrics of its incident faces; an
edge's base cost is the quadric error of the optimal merged position.  With a
saliency map, the cost is scaled by (1 + lambda * s) where s is the mean
saliency of the edge's endpoints (faces transfer saliency to vertices by
incident-face mean), so salient regions survive longer.  lambda = 0 multiplies
every cost by exactly 1.0 and reproduces the unweighted collapse sequence
bit for bit.

Collapses are greedy via a lazy min-heap with per-vertex version stamps.
Candidates that would pinch the surface (link condition) or flip a surviving
face normal by more than 90 degrees are rejected.  If no valid collapse
remains before the target is reached, the best achieved mesh is returned with
a warning.
"""
from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .mesh import TriMesh, make_mesh
from .saliency import SaliencyMap

SINGULAR_DET_EPS = 1e-12
AREA_EPS = 1e-14


def face_quadric(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Fundamental quadric of a face's supporting plane (4x4 PSD matrix)."""
    n = np.cross(v1 - v0, v2 - v0)
    norm = np.linalg.norm(n)
    if norm <= AREA_EPS:
        return np.zeros((4, 4))
    n = n / norm
    p = np.array([n[0], n[1], n[2], -float(n @ v0)])
    return np.outer(p, p)


def vertex_quadrics(mesh: TriMesh) -> np.ndarray:
    """(V, 4, 4) sum of fundamental quadrics over each vertex's incident faces."""
    q = np.zeros((mesh.n_vertices, 4, 4))
    tri = mesh.face_corner_positions()
    for f in range(mesh.n_faces):
        k = face_quadric(tri[f, 0], tri[f, 1], tri[f, 2])
        for v in mesh.faces[f]:
            q[v] += k
    return q


def quadric_error(q: np.ndarray, point: np.ndarray) -> float:
    h = np.array([point[0], point[1], point[2], 1.0])
    return float(h @ q @ h)


def optimal_position(q: np.ndarray, v_i: np.ndarray, v_j: np.ndarray) -> np.ndarray:
    """Minimizer of the combined quadric; falls back to the best of the
    endpoints and midpoint when the 3x3 system is singular."""
    a = q[:3, :3]
    b = -q[:3, 3]
    if abs(np.linalg.det(a)) > SINGULAR_DET_EPS:
        return np.linalg.solve(a, b)
    candidates = [v_i, v_j, 0.5 * (v_i + v_j)]
    errs = [quadric_error(q, c) for c in candidates]
    return candidates[int(np.argmin(errs))]


def vertex_saliency(mesh: TriMesh, saliency: SaliencyMap) -> np.ndarray:
    """Face saliency -> vertex saliency by incident-face mean."""
    acc = np.zeros(mesh.n_vertices)
    cnt = np.zeros(mesh.n_vertices)
    for f in range(mesh.n_faces):
        for v in mesh.faces[f]:
            acc[v] += saliency.values[f]
            cnt[v] += 1.0
    cnt[cnt == 0] = 1.0
    return acc / cnt


def saliency_weighted_cost(base_cost: float, s_i: float, s_j: float, lam: float) -> float:
    """cost * (1 + lambda * mean endpoint saliency); lambda = 0 is exact QEM."""
    if lam < 0:
        raise ConfigError("saliency weight lambda must be >= 0")
    if lam == 0.0:
        return base_cost
    return base_cost * (1.0 + lam * 0.5 * (s_i + s_j))


@dataclass
class SimplifyResult:
    mesh: TriMesh
    face_map: np.ndarray  # new face index -> original face index
    collapse_sequence: list[tuple[int, int]] = field(default_factory=list)
    reached_target: bool = True


class _Collapser:
    """Mutable working state of one simplification run."""

    def __init__(self, mesh: TriMesh, saliency: SaliencyMap | None, lam: float):
        self.positions = mesh.vertices.copy()
        self.faces = mesh.faces.copy()
        self.uvs = mesh.uvs.copy() if mesh.uvs is not None else None
        self.alive = np.ones(len(self.faces), dtype=bool)
        self.n_alive = len(self.faces)
        self.quadrics = vertex_quadrics(mesh)
        self.lam = lam
        self.vsal = (
            vertex_saliency(mesh, saliency) if saliency is not None else np.zeros(mesh.n_vertices)
        )
        self.v_faces: list[set[int]] = [set() for _ in range(mesh.n_vertices)]
        for f in range(mesh.n_faces):
            for v in self.faces[f]:
                self.v_faces[int(v)].add(f)
        self.version = np.zeros(mesh.n_vertices, dtype=np.int64)
        self.heap: list[tuple[float, int, int, int, int]] = []
        self.collapse_sequence: list[tuple[int, int]] = []
        for i, j in self._all_edges():
            self._push_edge(i, j)

    # -- topology helpers ----------------------------------------------------

    def _all_edges(self):
        seen = set()
        for f in range(len(self.faces)):
            a, b, c = (int(v) for v in self.faces[f])
            for u, v in ((a, b), (b, c), (c, a)):
                key = (u, v) if u < v else (v, u)
                if key not in seen:
                    seen.add(key)
                    yield key

    def _vertex_neighbors(self, v: int) -> set[int]:
        out: set[int] = set()
        for f in self.v_faces[v]:
            out.update(int(x) for x in self.faces[f])
        out.discard(v)
        return out

    def _edge_cost(self, i: int, j: int) -> tuple[float, np.ndarray]:
        q = self.quadrics[i] + self.quadrics[j]
        pos = optimal_position(q, self.positions[i], self.positions[j])
        base = max(0.0, quadric_error(q, pos))
        return saliency_weighted_cost(base, self.vsal[i], self.vsal[j], self.lam), pos

    def _push_edge(self, i: int, j: int) -> None:
        if i > j:
            i, j = j, i
        cost, _ = self._edge_cost(i, j)
        heapq.heappush(
            self.heap, (cost, i, j, int(self.version[i]), int(self.version[j]))
        )

    # -- collapse validity ----------------------------------------------------

    def _shared_faces(self, i: int, j: int) -> set[int]:
        return self.v_faces[i] & self.v_faces[j]

    def _link_ok(self, i: int, j: int, shared: set[int]) -> bool:
        """Common vertex-neighbors must be exactly the shared faces' apexes."""
        common = self._vertex_neighbors(i) & self._vertex_neighbors(j)
        apexes = set()
        for f in shared:
            for v in self.faces[f]:
                if int(v) != i and int(v) != j:
                    apexes.add(int(v))
        return common == apexes

    def _fold_ok(self, i: int, j: int, pos: np.ndarray, shared: set[int]) -> bool:
        """No surviving incident face may flip its normal or collapse to zero."""
        for v in (i, j):
            for f in self.v_faces[v]:
                if f in shared:
                    continue
                corners = self.positions[self.faces[f]].copy()
                before = np.cross(corners[1] - corners[0], corners[2] - corners[0])
                where = np.where(self.faces[f] == v)[0]
                corners[where] = pos
                after = np.cross(corners[1] - corners[0], corners[2] - corners[0])
                if np.linalg.norm(after) <= AREA_EPS or float(before @ after) <= 0.0:
                    return False
        return True

    # -- main loop ---------------------------------------------------------

    def run(self, target_faces: int) -> bool:
        while self.n_alive > target_faces and self.heap:
            cost, i, j, ver_i, ver_j = heapq.heappop(self.heap)
            if ver_i != self.version[i] or ver_j != self.version[j]:
                continue  # stale entry
            shared = self._shared_faces(i, j)
            if not shared:
                continue  # edge no longer exists
            _, pos = self._edge_cost(i, j)
            if not self._link_ok(i, j, shared):
                continue
            if not self._fold_ok(i, j, pos, shared):
                continue
            self._collapse(i, j, pos, shared)
        return self.n_alive <= target_faces

    def _collapse(self, i: int, j: int, pos: np.ndarray, shared: set[int]) -> None:
        self.collapse_sequence.append((i, j))
        self.positions[i] = pos
        self.quadrics[i] = self.quadrics[i] + self.quadrics[j]
        self.vsal[i] = max(self.vsal[i], self.vsal[j])

        for f in shared:
            self.alive[f] = False
            self.n_alive -= 1
            for v in self.faces[f]:
                self.v_faces[int(v)].discard(f)

        # Remap j -> i in surviving faces; per-corner UVs stay with their face.
        for f in list(self.v_faces[j]):
            self.faces[f][self.faces[f] == j] = i
            self.v_faces[i].add(f)
        self.v_faces[j] = set()

        self.version[i] += 1
        self.version[j] += 1
        for nb in sorted(self._vertex_neighbors(i)):
            self._push_edge(i, nb)


def simplify_to(
    mesh: TriMesh,
    target_faces: int,
    saliency: SaliencyMap | None = None,
    lam: float = 0.0,
) -> SimplifyResult:
    """Greedy edge collapses until ``target_faces`` remain.

    Returns the simplified mesh plus a correspondence array mapping each new
    face to the original face it came from.  Saliency (with lam > 0) protects
    high-attention regions by inflating their collapse costs.
    """
    if lam < 0:
        raise ConfigError("saliency weight lambda must be >= 0")
    if target_faces >= mesh.n_faces:
        return SimplifyResult(mesh=mesh, face_map=np.arange(mesh.n_faces), reached_target=True)
    if saliency is not None and saliency.mesh_face_count != mesh.n_faces:
        raise ValueError("saliency map does not match the mesh face count")

    state = _Collapser(mesh, saliency, lam)
    reached = state.run(target_faces)
    if not reached:
        warnings.warn(
            f"topological lock at {state.n_alive} faces before reaching {target_faces}",
            RuntimeWarning,
            stacklevel=2,
        )

    surviving = np.where(state.alive)[0]
    used = np.unique(state.faces[surviving])
    remap = np.full(len(state.positions), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    new_faces = remap[state.faces[surviving]]
    new_uvs = state.uvs[surviving] if state.uvs is not None else None
    out = make_mesh(
        state.positions[used],
        new_faces,
        uvs=new_uvs,
        texture=mesh.texture,
    )
    # make_mesh drops degenerate faces; keep the correspondence aligned.
    if out.n_faces != len(surviving):
        tri = state.positions[state.faces[surviving]]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )
        surviving = surviving[areas > 1e-12]
    return SimplifyResult(
        mesh=out,
        face_map=surviving,
        collapse_sequence=state.collapse_sequence,
        reached_target=reached,
    )
