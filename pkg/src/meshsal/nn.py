"""Thin layer helpers over the autodiff engine: linear maps and layer norm.

Parameters live in a flat dict (name -> Tensor) owned by the model; helpers
here only create and apply them, which keeps checkpointing and the optimizer
trivial (iterate the dict).
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def init_linear(
    params: dict[str, Tensor],
    name: str,
    n_in: int,
    n_out: int,
    rng: np.random.Generator,
    scale: float | None = None,
) -> None:
    params[f"{name}.w"] = ad.parameter((n_in, n_out), rng=rng, scale=scale)
    params[f"{name}.b"] = ad.parameter(np.zeros(n_out))


def linear(x: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


def init_layer_norm(params: dict[str, Tensor], name: str, dim: int) -> None:
    params[f"{name}.gain"] = ad.parameter(np.ones(dim))
    params[f"{name}.bias"] = ad.parameter(np.zeros(dim))


def layer_norm(x: Tensor, params: dict[str, Tensor], name: str, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normed = centered / ad.sqrt(var + eps)
    return normed * params[f"{name}.gain"] + params[f"{name}.bias"]


ACTIVATIONS = {
    "softplus": ad.softplus,
    "relu": ad.relu,
    "tanh": ad.tanh,
    "identity": lambda x: x,
}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError as exc:
        raise ValueError(f"unknown activation {name!r}") from exc
