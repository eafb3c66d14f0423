"""Upsampling patch outputs to per-face predictions by voting interpolation.

Every face blends the three nearest patch tokens, weighted by inverse distance
between the face center and the token's center face; the weights sum to one,
so each face's feature is a convex combination of its three nearest tokens.  A
small per-face head then maps the blended feature to a nonnegative scalar.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .errors import ConfigError

INV_DIST_EPS = 1e-8
K_NEAREST = 3


def propagation_plan(
    token_centers: np.ndarray, query_centers: np.ndarray, eps: float = INV_DIST_EPS
) -> tuple[np.ndarray, np.ndarray]:
    """Indices (F, 3) and convex weights (F, 3) of each face's nearest tokens.

    Weights are 1/(d+eps), normalized.  A query coinciding with a token center
    short-circuits to that token with weight exactly 1.  Distance ties resolve
    by token index (stable sort), keeping the plan deterministic.
    """
    n_tokens = len(token_centers)
    if n_tokens < K_NEAREST:
        raise ConfigError(f"voting interpolation needs >= {K_NEAREST} tokens, got {n_tokens}")
    d = np.linalg.norm(query_centers[:, None, :] - token_centers[None, :, :], axis=2)
    idx = np.argsort(d, axis=1, kind="stable")[:, :K_NEAREST]
    dsel = np.take_along_axis(d, idx, axis=1)
    inv = 1.0 / (dsel + eps)
    weights = inv / inv.sum(axis=1, keepdims=True)
    exact = dsel[:, 0] == 0.0
    if exact.any():
        weights[exact] = 0.0
        weights[exact, 0] = 1.0
    return idx, weights


def propagate(tokens: Tensor, idx: np.ndarray, weights: np.ndarray) -> Tensor:
    """(L, D) patch tokens -> (F, D) per-face features via the plan."""
    gathered = tokens[idx]  # (F, 3, D)
    return (gathered * Tensor(weights[:, :, None])).sum(axis=1)


def init_head(
    params: dict[str, Tensor], rng: np.random.Generator, d_in: int, hidden: int
) -> None:
    nn.init_linear(params, "head.l1", d_in, hidden, rng)
    # Small output weights and a positive bias keep initial predictions near
    # the middle of the [0, 1] target range, well away from the dead side of
    # the nonnegativity clamp.
    nn.init_linear(params, "head.l2", hidden, 1, rng, scale=0.02 / np.sqrt(hidden))
    params["head.l2.b"].data[:] = 0.5


def predict_head(features: Tensor, params: dict[str, Tensor]) -> Tensor:
    """(F, D) features -> (F,) nonnegative saliency scores.

    Two linear layers with a softplus between, then a clamp at zero whose
    subgradient is zero on the boundary.
    """
    h = ad.softplus(nn.linear(features, params, "head.l1"))
    raw = nn.linear(h, params, "head.l2").reshape(-1)
    return ad.relu(raw)
