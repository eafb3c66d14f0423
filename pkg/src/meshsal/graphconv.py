"""Input fusion and graph convolution over the face adjacency graph.

Fusion concatenates the per-face feature families selected by the input mode:
geometry always, mean vertex color in "color" mode, pooled texture features in
"texture" mode.  The encoder then mixes each face with the mean of its
edge-adjacent faces through a stack of graph convolution layers:

    x'(i) = act( W_self x(i) + W_neigh mean_{j in adj(i)} x(j) + b )

Faces with no neighbors use their own feature as the neighbor mean.  With k
layers, a face's receptive field is exactly its k-hop adjacency neighborhood.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .errors import ConfigError, NumericError
from .mesh import TriMesh

INPUT_MODES = ("geometry", "color", "texture")


def mean_vertex_colors(mesh: TriMesh) -> np.ndarray:
    """(F, 3) mean of the three corner vertex colors per face."""
    if mesh.vertex_colors is None:
        raise ConfigError("mesh has no vertex colors")
    return mesh.vertex_colors[mesh.faces].mean(axis=1)


def fuse_inputs(
    geo: np.ndarray | Tensor,
    tex: np.ndarray | Tensor | None = None,
    color: np.ndarray | Tensor | None = None,
    mode: str = "geometry",
):
    """Concatenate per-face channels according to the input mode.

    Returns the same kind as its inputs: a plain array when everything is
    numpy, a Tensor as soon as any input participates in the autodiff graph.
    Absent optional channels simply shrink the feature dimension.
    """
    if mode not in INPUT_MODES:
        raise ConfigError(f"unknown input mode {mode!r}")
    blocks = [geo]
    if mode == "color":
        if color is None:
            raise ConfigError("input mode 'color' requires vertex colors")
        blocks.append(color)
    elif mode == "texture":
        if tex is None:
            raise ConfigError("input mode 'texture' requires texture features")
        blocks.append(tex)
    if any(isinstance(b, Tensor) for b in blocks):
        return ad.concatenate([ad.as_tensor(b) for b in blocks], axis=1)
    return np.concatenate(blocks, axis=1)


def neighbor_plan(adjacency: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Padded neighbor indices (F, K) and averaging weights (F, K).

    Real neighbor slots get weight 1/degree; padding points at the face itself
    with weight 0, except isolated faces whose self-slot carries weight 1 so
    the neighbor mean falls back to the face's own feature.
    """
    n = len(adjacency)
    width = max(3, max((len(a) for a in adjacency), default=0))
    idx = np.empty((n, width), dtype=np.int64)
    w = np.zeros((n, width))
    for f, nbrs in enumerate(adjacency):
        deg = len(nbrs)
        if deg:
            idx[f, :deg] = nbrs
            idx[f, deg:] = f
            w[f, :deg] = 1.0 / deg
        else:
            idx[f, :] = f
            w[f, 0] = 1.0
    return idx, w


def init_graph_conv(
    params: dict[str, Tensor],
    rng: np.random.Generator,
    d_in: int,
    d_out: int,
    layers: int,
) -> None:
    d = d_in
    for i in range(layers):
        nn.init_linear(params, f"gconv{i}.self", d, d_out, rng)
        nn.init_linear(params, f"gconv{i}.neigh", d, d_out, rng)
        d = d_out


def graph_conv_forward(
    inputs: Tensor,
    adjacency: list[np.ndarray],
    params: dict[str, Tensor],
    layers: int,
    act: str = "softplus",
) -> Tensor:
    """Encode per-face inputs into a topology-aware embedding."""
    activate = nn.activation(act)
    idx, w = neighbor_plan(adjacency)
    w_t = Tensor(w[:, :, None])
    x = ad.as_tensor(inputs)
    for i in range(layers):
        nmean = (x[idx] * w_t).sum(axis=1)  # (F, D)
        pre = nn.linear(x, params, f"gconv{i}.self") + nn.linear(nmean, params, f"gconv{i}.neigh")
        x = activate(pre)
        if not np.all(np.isfinite(x.data)):
            raise NumericError(f"non-finite activations in graph conv layer {i}")
    return x
