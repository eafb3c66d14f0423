"""Per-face geometric features: spatial position, local curvature, and shape.

Three families, concatenated in a fixed documented layout:

* spatial (3): face center normalized into the mesh bounding box, [0, 1]^3.
  Axes with zero extent map to 0.5.
* curve (3): cosine similarity between the face normal and each edge-adjacent
  face's normal, in ascending neighbor-index order, padded with 1.0 (reads as
  locally flat) when fewer than three neighbors exist.
* shape (8): the three pairwise angles between corner vectors (radians), the
  three corner lengths, the face area, and an irregularity score
  longest_edge / (2 * inradius): sqrt(3) for an equilateral triangle, growing
  without bound as the triangle degenerates.

Angles and irregularity are invariant under rigid motion and uniform scaling;
curve features are invariant under rigid motion.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshFormatError
from .mesh import TriMesh

SPATIAL_DIM = 3
CURVE_DIM = 3
SHAPE_DIM = 8


@dataclass
class ShapeFeature:
    angles: np.ndarray  # (3,) pairwise corner-vector angles, radians
    lengths: np.ndarray  # (3,) corner vector lengths
    area: float
    irregularity: float


@dataclass
class GeoFeature:
    spatial: np.ndarray
    curve: np.ndarray
    shape: ShapeFeature

    def concat(self) -> np.ndarray:
        return np.concatenate(
            [
                self.spatial,
                self.curve,
                self.shape.angles,
                self.shape.lengths,
                [self.shape.area, self.shape.irregularity],
            ]
        )


def spatial_features(mesh: TriMesh) -> np.ndarray:
    """(F, 3) face centers normalized into the axis-aligned bounding box."""
    lo, hi = mesh.bounding_box()
    extent = hi - lo
    centers = mesh.face_centers()
    out = np.empty_like(centers)
    for ax in range(3):
        if extent[ax] > 0.0:
            out[:, ax] = (centers[:, ax] - lo[ax]) / extent[ax]
        else:
            out[:, ax] = 0.5
    return out


def spatial_feature(mesh: TriMesh, face: int) -> np.ndarray:
    return spatial_features(mesh)[face]


def curve_features(mesh: TriMesh) -> np.ndarray:
    """(F, 3) normal-cosine similarity with edge-adjacent faces, padded with 1.0."""
    normals = mesh.face_normals()
    out = np.ones((mesh.n_faces, CURVE_DIM))
    for f in range(mesh.n_faces):
        nbrs = mesh.adjacency[f][:CURVE_DIM]
        if len(nbrs):
            cos = normals[nbrs] @ normals[f]
            out[f, : len(nbrs)] = np.clip(cos, -1.0, 1.0)
    return out


def curve_feature(mesh: TriMesh, face: int) -> np.ndarray:
    return curve_features(mesh)[face]


def shape_feature(mesh: TriMesh, face: int) -> ShapeFeature:
    """Corner-vector angles/lengths, area, and scale-free irregularity.

    Irregularity is longest_edge / (2 * inradius): sqrt(3) ~ 1.732 for an
    equilateral triangle, larger for skinnier triangles.
    """
    tri = mesh.vertices[mesh.faces[face]]
    center = tri.mean(axis=0)
    corners = tri - center
    lengths = np.linalg.norm(corners, axis=1)
    unit = corners / lengths[:, None]
    pair_cos = np.clip(
        [unit[0] @ unit[1], unit[1] @ unit[2], unit[2] @ unit[0]], -1.0, 1.0
    )
    angles = np.arccos(pair_cos)

    edges = np.array(
        [
            np.linalg.norm(tri[1] - tri[0]),
            np.linalg.norm(tri[2] - tri[1]),
            np.linalg.norm(tri[0] - tri[2]),
        ]
    )
    area = 0.5 * float(np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])))
    semi = 0.5 * edges.sum()
    inradius = area / semi
    return ShapeFeature(
        angles=angles,
        lengths=lengths,
        area=area,
        irregularity=float(edges.max() / (2.0 * inradius)),
    )


def shape_features(mesh: TriMesh) -> np.ndarray:
    """(F, 8) stacked shape records: angles(3), lengths(3), area, irregularity."""
    out = np.empty((mesh.n_faces, SHAPE_DIM))
    for f in range(mesh.n_faces):
        s = shape_feature(mesh, f)
        out[f] = np.concatenate([s.angles, s.lengths, [s.area, s.irregularity]])
    return out


def geo_feature(mesh: TriMesh, face: int) -> GeoFeature:
    return GeoFeature(
        spatial=spatial_feature(mesh, face),
        curve=curve_feature(mesh, face),
        shape=shape_feature(mesh, face),
    )


def feature_layout(use_spatial: bool = True, use_curve: bool = True, use_shape: bool = True) -> list[str]:
    """Column names of :func:`geo_feature_matrix`, in order."""
    names: list[str] = []
    if use_spatial:
        names += ["spatial_x", "spatial_y", "spatial_z"]
    if use_curve:
        names += ["curve_0", "curve_1", "curve_2"]
    if use_shape:
        names += [
            "angle_01", "angle_12", "angle_20",
            "corner_len_0", "corner_len_1", "corner_len_2",
            "area", "irregularity",
        ]
    return names


def geo_feature_matrix(
    mesh: TriMesh, use_spatial: bool = True, use_curve: bool = True, use_shape: bool = True
) -> np.ndarray:
    """(F, D) feature matrix with the documented fixed column layout."""
    blocks = []
    if use_spatial:
        blocks.append(spatial_features(mesh))
    if use_curve:
        blocks.append(curve_features(mesh))
    if use_shape:
        blocks.append(shape_features(mesh))
    if not blocks:
        return np.zeros((mesh.n_faces, 0))
    return np.concatenate(blocks, axis=1)


# -- binary feature dump ------------------------------------------------------

_MAGIC = b"MESHSAL-FEAT1\n"


def save_feature_matrix(path: str | Path, matrix: np.ndarray, layout: list[str]) -> None:
    """Binary dump: magic, one JSON header line, then row-major float64 data."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    header = json.dumps(
        {"rows": matrix.shape[0], "cols": matrix.shape[1], "layout": layout, "dtype": "float64"},
        sort_keys=True,
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(matrix.tobytes())


def load_feature_matrix(path: str | Path) -> tuple[np.ndarray, list[str]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise MeshFormatError(f"{path}: not a feature dump")
        header = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype=np.float64)
    matrix = data.reshape(header["rows"], header["cols"])
    return matrix, list(header["layout"])
