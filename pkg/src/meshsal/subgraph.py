"""Mesh partitioning into token patches: FPS centers + random-walk subgraphs.

Farthest point sampling spreads L center faces over the mesh; each center
grows a connected, repetition-free subgraph of M faces by randomly walking the
face adjacency graph.  Walk-based patches keep adjacency intact, unlike
nearest-neighbor clustering (available as the ablation sampler), which can
group faces that are spatially close but topologically unconnected.

Per-center randomness comes from independent streams spawned off one master
seed, so sampling is reproducible regardless of evaluation order.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError
from .mesh import TriMesh


@dataclass
class Subgraph:
    """Ordered face patch grown from a center face.

    ``members`` are distinct face indices in walk order, members[0] is the
    center, and every member is edge-connected to an earlier member.
    ``pad_count`` > 0 flags a component smaller than the requested length; the
    embedding stage repeats the center's feature to fill the quota.
    """

    center: int
    members: np.ndarray
    pad_count: int = 0


@dataclass
class TokenSequence:
    """L+1 patch tokens (slot 0 is the aggregate token) plus positional terms."""

    tokens: Tensor  # (L+1, D_tok) before positional offset
    pos: Tensor  # (L+1, D_tok) learnable positional embedding
    centers: np.ndarray  # (L, 3) face centers of the patch centers

    def initial(self) -> Tensor:
        """Input sequence to the first block: tokens + positional embedding."""
        return self.tokens + self.pos


def fps_centers(mesh: TriMesh, count: int) -> np.ndarray:
    """Greedy max-min farthest point sampling over face centers.

    Deterministic seeding: the face nearest the bounding-box centroid serves
    as the distance seed, and the first selected center is the face farthest
    from it (farthest-first start, so e.g. two centers on a collinear mesh are
    the two extremes).  Distance ties resolve to the lowest face index.
    """
    if count > mesh.n_faces:
        raise ConfigError(f"requested {count} centers from a {mesh.n_faces}-face mesh")
    centers = mesh.face_centers()
    lo, hi = mesh.bounding_box()
    seed = int(np.argmin(np.linalg.norm(centers - 0.5 * (lo + hi), axis=1)))
    first = int(np.argmax(np.linalg.norm(centers - centers[seed], axis=1)))
    chosen = [first]
    dist = np.linalg.norm(centers - centers[first], axis=1)
    for _ in range(count - 1):
        nxt = int(np.argmax(dist))  # argmax takes the first (lowest) index on ties
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(centers - centers[nxt], axis=1))
    return np.array(chosen, dtype=np.int64)


def random_walk_subgraph(
    mesh: TriMesh, center: int, length: int, rng: np.random.Generator
) -> Subgraph:
    """Grow a connected repetition-free patch of ``length`` faces from ``center``.

    The walk moves to a uniformly chosen unvisited adjacent face; when stuck it
    restarts from a uniformly chosen visited face that still has unvisited
    neighbors.  If the connected component is exhausted first, the subgraph is
    returned short with ``pad_count`` set (and a warning).
    """
    visited = {center}
    members = [center]
    current = center
    while len(members) < length:
        options = [int(f) for f in mesh.adjacency[current] if f not in visited]
        if not options:
            frontier = [
                f for f in members if any(int(n) not in visited for n in mesh.adjacency[f])
            ]
            if not frontier:
                break  # component exhausted
            current = frontier[int(rng.integers(len(frontier)))]
            options = [int(f) for f in mesh.adjacency[current] if f not in visited]
        current = options[int(rng.integers(len(options)))]
        visited.add(current)
        members.append(current)

    pad = length - len(members)
    if pad:
        warnings.warn(
            f"component of face {center} has only {len(members)} faces; "
            f"padding {pad} slots with the center's feature",
            RuntimeWarning,
            stacklevel=2,
        )
    return Subgraph(center=center, members=np.array(members, dtype=np.int64), pad_count=pad)


def knn_subgraph(mesh: TriMesh, center: int, length: int) -> Subgraph:
    """Ablation sampler: the M nearest faces by center distance.

    Ignores adjacency entirely, so the induced patch may be disconnected.
    """
    centers = mesh.face_centers()
    d = np.linalg.norm(centers - centers[center], axis=1)
    d[center] = -1.0  # center always first
    order = np.argsort(d, kind="stable")[:length]
    pad = max(0, length - len(order))
    return Subgraph(center=center, members=order.astype(np.int64), pad_count=pad)


def sample_subgraphs(
    mesh: TriMesh,
    centers: np.ndarray,
    length: int,
    seed: int,
    sampler: str = "rws",
) -> list[Subgraph]:
    """One subgraph per center, each from its own spawned RNG stream."""
    streams = np.random.SeedSequence(seed).spawn(len(centers))
    out = []
    for c, ss in zip(centers, streams):
        if sampler == "rws":
            out.append(random_walk_subgraph(mesh, int(c), length, np.random.default_rng(ss)))
        elif sampler == "knn":
            out.append(knn_subgraph(mesh, int(c), length))
        else:
            raise ConfigError(f"unknown subgraph sampler {sampler!r}")
    return out


def coverage_fraction(subgraphs: list[Subgraph], n_faces: int) -> float:
    """Fraction of mesh faces covered by at least one subgraph.

    Subgraphs from different centers may overlap, so coverage is usually below
    (L * M) / F; this statistic is reported per run for diagnostics.
    """
    covered: set[int] = set()
    for sg in subgraphs:
        covered.update(int(m) for m in sg.members)
    return len(covered) / max(1, n_faces)


def dump_subgraphs(path, subgraphs: list[Subgraph]) -> None:
    """Debug dump: one line per subgraph listing its member face indices."""
    from pathlib import Path

    lines = [" ".join(str(int(m)) for m in sg.members) for sg in subgraphs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def member_index_matrix(subgraphs: list[Subgraph], length: int) -> np.ndarray:
    """(L, M) member indices with short subgraphs padded by their center."""
    idx = np.empty((len(subgraphs), length), dtype=np.int64)
    for i, sg in enumerate(subgraphs):
        idx[i, : len(sg.members)] = sg.members
        idx[i, len(sg.members) :] = sg.center
    return idx


def embed_patches(
    subgraphs: list[Subgraph],
    face_embeddings: Tensor,
    params: dict[str, Tensor],
    centers_xyz: np.ndarray,
    length: int,
) -> TokenSequence:
    """Pool member embeddings into patch tokens and prepend the aggregate token.

    Pooling is order-invariant (mean and max concatenated) so the token does
    not depend on the walk order, then a learned projection maps to token
    width.  Padded slots repeat the center's embedding, which only reweights
    the mean.
    """
    idx = member_index_matrix(subgraphs, length)
    member_feats = face_embeddings[idx]  # (L, M, D_enc)
    pooled = ad.concatenate(
        [member_feats.mean(axis=1), member_feats.max(axis=1)], axis=1
    )  # (L, 2*D_enc)
    patches = pooled @ params["patch.proj.w"] + params["patch.proj.b"]
    tokens = ad.concatenate([params["patch.cls"].reshape(1, -1), patches], axis=0)
    return TokenSequence(tokens=tokens, pos=params["patch.pos"], centers=centers_xyz)
