"""End-to-end saliency prediction model.

Pipeline per mesh: fuse per-face features (geometry, optionally vertex color
or texture) -> graph convolution encoder -> FPS + random-walk patch tokens ->
stacked bidirectional SSM blocks -> voting interpolation back to faces -> a
small nonnegative head.

The model separates three kinds of state so training and evaluation stay
reproducible:

* parameters: a flat name -> Tensor dict created once from the config seed;
* MeshInputs: mesh-dependent, parameter-free precomputation (features, texture
  sampling tables), cacheable per mesh;
* SamplingPlan: the per-forward randomness (random-walk subgraphs) plus the
  deterministic FPS centers and interpolation tables, derived from one seed.

Every ablation of the component study is a config field, so ablated variants
are constructed (and trained) exactly like the full model.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .errors import ConfigError
from .geometry import feature_layout, geo_feature_matrix
from .graphconv import (
    fuse_inputs,
    graph_conv_forward,
    init_graph_conv,
    mean_vertex_colors,
)
from .mesh import TriMesh
from .propagation import init_head, predict_head, propagate, propagation_plan
from .saliency import SaliencyMap
from .ssm import BlockParams, init_block_params, stack_blocks
from .subgraph import Subgraph, embed_patches, fps_centers, sample_subgraphs
from .texture import EncoderConfig, bilinear_weights, conv3x3_indices, encode_texture

STANDARDIZE_EPS = 1e-6


@dataclass
class ModelConfig:
    """All architecture knobs; every component toggle used by the ablation study."""

    input_mode: str = "geometry"  # geometry | color | texture
    use_spatial: bool = True
    use_curve: bool = True
    use_shape: bool = True
    standardize_inputs: bool = True

    use_graph_conv: bool = True
    conv_layers: int = 2
    d_enc: int = 128
    activation: str = "softplus"

    n_centers: int = 128  # L: subgraphs per mesh
    subgraph_len: int = 32  # M: faces per subgraph
    subgraph_sampler: str = "rws"  # rws | knn (ablation)

    d_tok: int = 192
    n_state: int = 16
    n_blocks: int = 4  # T
    pseudo_neighbors: int = 4  # l copies in feature diffusion
    diffuse_noise: float = 0.0
    use_diffusion: bool = True
    use_ssm_forward: bool = True
    use_ssm_backward: bool = True

    head_hidden: int = 64

    encoder_mode: str = "conv"  # texture encoder: conv (learned) | identity
    encoder_dim: int = 8
    grid_density: int = 8
    tex_pool: str = "mean"

    param_seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def geo_dim(self) -> int:
        return len(feature_layout(self.use_spatial, self.use_curve, self.use_shape))


ABLATION_TOGGLES = (
    "none",
    "texture",
    "spatial",
    "shape",
    "curve",
    "graph-conv",
    "subgraph",
    "diffusion",
    "ssm-forward",
    "ssm-backward",
)


def apply_ablation(cfg: ModelConfig, toggle: str) -> ModelConfig:
    """Return a config with one component removed (the ablation rows)."""
    d = cfg.as_dict()
    if toggle == "none":
        pass
    elif toggle == "texture":
        d["input_mode"] = "geometry"
    elif toggle == "spatial":
        d["use_spatial"] = False
    elif toggle == "shape":
        d["use_shape"] = False
    elif toggle == "curve":
        d["use_curve"] = False
    elif toggle == "graph-conv":
        d["use_graph_conv"] = False
    elif toggle == "subgraph":
        d["subgraph_sampler"] = "knn"
    elif toggle == "diffusion":
        d["use_diffusion"] = False
    elif toggle == "ssm-forward":
        d["use_ssm_forward"] = False
    elif toggle == "ssm-backward":
        d["use_ssm_backward"] = False
    else:
        raise ConfigError(f"unknown ablation toggle {toggle!r}; choose from {ABLATION_TOGGLES}")
    return ModelConfig.from_dict(d)


@dataclass
class MeshInputs:
    """Parameter-free per-mesh precomputation consumed by forward passes."""

    mesh: TriMesh
    geo: np.ndarray  # (F, Dg)
    color: np.ndarray | None  # (F, 3)
    tex_image_flat: np.ndarray | None  # (H*W, C)
    tex_conv_idx: np.ndarray | None  # (H*W, 9) im2col indices
    tex_sample_idx: np.ndarray | None  # (F*G*G, 4) bilinear cells
    tex_sample_w: np.ndarray | None  # (F*G*G, 4)
    tex_identity: np.ndarray | None  # (F, C) pooled features for identity encoder


@dataclass
class SamplingPlan:
    """Randomness and interpolation tables of one forward pass."""

    centers_idx: np.ndarray  # (L,)
    subgraphs: list[Subgraph]
    centers_xyz: np.ndarray  # (L, 3)
    prop_idx: np.ndarray  # (F, 3)
    prop_w: np.ndarray  # (F, 3)
    seed: int


class SaliencyModel:
    """Holds the parameter dict and runs forward passes."""

    def __init__(self, config: ModelConfig, texture_channels: int = 3):
        self.config = config
        self.texture_channels = texture_channels
        self.params: dict[str, Tensor] = {}
        self.blocks: list[BlockParams] = []
        self._build_params()

    # -- construction -----------------------------------------------------

    def input_dim(self) -> int:
        cfg = self.config
        dim = cfg.geo_dim()
        if cfg.input_mode == "color":
            dim += 3
        elif cfg.input_mode == "texture":
            dim += cfg.encoder_dim if cfg.encoder_mode == "conv" else self.texture_channels
        return dim

    def _build_params(self) -> None:
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence([cfg.param_seed, 101]))
        d_in = self.input_dim()
        if d_in == 0:
            raise ConfigError("all feature families disabled; model has no inputs")

        if cfg.input_mode == "texture" and cfg.encoder_mode == "conv":
            self.params["tex.kernel"] = ad.parameter(
                (9 * self.texture_channels, cfg.encoder_dim), rng=rng
            )
            self.params["tex.bias"] = ad.parameter(np.zeros(cfg.encoder_dim))

        if cfg.use_graph_conv:
            init_graph_conv(self.params, rng, d_in, cfg.d_enc, cfg.conv_layers)
        else:
            nn.init_linear(self.params, "enc_lin", d_in, cfg.d_enc, rng)

        nn.init_linear(self.params, "patch.proj", 2 * cfg.d_enc, cfg.d_tok, rng)
        self.params["patch.cls"] = ad.parameter(
            rng.normal(0.0, 0.02, size=cfg.d_tok)
        )
        self.params["patch.pos"] = ad.parameter(
            rng.normal(0.0, 0.02, size=(cfg.n_centers + 1, cfg.d_tok))
        )

        for i in range(cfg.n_blocks):
            self.blocks.append(
                init_block_params(
                    self.params,
                    f"block{i}",
                    rng,
                    cfg.d_tok,
                    cfg.n_state,
                    cfg.pseudo_neighbors,
                    cfg.diffuse_noise,
                )
            )
        init_head(self.params, rng, cfg.d_tok, cfg.head_hidden)

    # -- per-mesh precomputation -------------------------------------------

    def prepare(self, mesh: TriMesh) -> MeshInputs:
        cfg = self.config
        geo = geo_feature_matrix(mesh, cfg.use_spatial, cfg.use_curve, cfg.use_shape)
        color = None
        if cfg.input_mode == "color":
            color = mean_vertex_colors(mesh)

        tex_flat = conv_idx = samp_idx = samp_w = tex_identity = None
        if cfg.input_mode == "texture":
            if mesh.texture is None or mesh.uvs is None:
                raise ConfigError("input mode 'texture' requires a textured mesh with UVs")
            img = mesh.texture.data
            h, w, _ = img.shape
            samp_idx, samp_w = self._grid_sample_tables(mesh, h, w)
            if cfg.encoder_mode == "conv":
                tex_flat = img.reshape(h * w, -1)
                conv_idx = conv3x3_indices(h, w)
            else:
                latent = encode_texture(mesh.texture, EncoderConfig(mode="identity"))
                flat = latent.codes.reshape(-1, latent.dim)
                sampled = (flat[samp_idx] * samp_w[:, :, None]).sum(axis=1)
                tex_identity = self._pool_grid_np(sampled, mesh.n_faces)
        return MeshInputs(
            mesh=mesh,
            geo=geo,
            color=color,
            tex_image_flat=tex_flat,
            tex_conv_idx=conv_idx,
            tex_sample_idx=samp_idx,
            tex_sample_w=samp_w,
            tex_identity=tex_identity,
        )

    def _grid_sample_tables(self, mesh: TriMesh, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
        """Stacked bilinear lookup tables for every face's GxG UV window."""
        from .texture import face_window

        g = self.config.grid_density
        offs = ((np.arange(g) + 0.5) / g - 0.5)
        uu, vv = np.meshgrid(offs, offs, indexing="xy")
        all_uvs = np.empty((mesh.n_faces * g * g, 2))
        for f in range(mesh.n_faces):
            center, side, _ = face_window(mesh, f)
            if side <= 0.0:
                pts = np.repeat(mesh.uvs[f].mean(axis=0)[None, :], g * g, axis=0)
            else:
                pts = np.stack(
                    [center[0] + uu.ravel() * side, center[1] + vv.ravel() * side], axis=1
                )
            all_uvs[f * g * g : (f + 1) * g * g] = pts
        return bilinear_weights(h, w, all_uvs)

    def _pool_grid_np(self, sampled: np.ndarray, n_faces: int) -> np.ndarray:
        g2 = self.config.grid_density**2
        grids = sampled.reshape(n_faces, g2, -1)
        if self.config.tex_pool == "max":
            return grids.max(axis=1)
        return grids.mean(axis=1)

    # -- sampling plan ------------------------------------------------------

    def sample_plan(self, mesh: TriMesh, seed: int) -> SamplingPlan:
        cfg = self.config
        centers_idx = fps_centers(mesh, cfg.n_centers)
        subgraphs = sample_subgraphs(
            mesh, centers_idx, cfg.subgraph_len, seed, sampler=cfg.subgraph_sampler
        )
        centers_xyz = mesh.face_centers()[centers_idx]
        prop_idx, prop_w = propagation_plan(centers_xyz, mesh.face_centers())
        return SamplingPlan(
            centers_idx=centers_idx,
            subgraphs=subgraphs,
            centers_xyz=centers_xyz,
            prop_idx=prop_idx,
            prop_w=prop_w,
            seed=seed,
        )

    # -- forward --------------------------------------------------------------

    def _texture_features(self, inputs: MeshInputs) -> Tensor | np.ndarray:
        cfg = self.config
        if cfg.encoder_mode != "conv":
            return inputs.tex_identity
        flat = Tensor(inputs.tex_image_flat)
        patches = flat[inputs.tex_conv_idx].reshape(
            inputs.tex_image_flat.shape[0], 9 * self.texture_channels
        )
        latent = ad.softplus(patches @ self.params["tex.kernel"] + self.params["tex.bias"])
        sampled = (latent[inputs.tex_sample_idx] * Tensor(inputs.tex_sample_w[:, :, None])).sum(
            axis=1
        )  # (F*G*G, D)
        g2 = cfg.grid_density**2
        grids = sampled.reshape(inputs.mesh.n_faces, g2, cfg.encoder_dim)
        if cfg.tex_pool == "max":
            return grids.max(axis=1)
        return grids.mean(axis=1)

    def _fused_inputs(self, inputs: MeshInputs):
        cfg = self.config
        tex = self._texture_features(inputs) if cfg.input_mode == "texture" else None
        fused = fuse_inputs(inputs.geo, tex=tex, color=inputs.color, mode=cfg.input_mode)
        if not cfg.standardize_inputs:
            return ad.as_tensor(fused)
        x = ad.as_tensor(fused)
        mu = x.mean(axis=0, keepdims=True)
        centered = x - mu
        # the tiny floor keeps the sqrt differentiable on constant columns
        sd = ad.sqrt((centered * centered).mean(axis=0, keepdims=True) + 1e-12)
        return centered / (sd + STANDARDIZE_EPS)

    def forward(
        self,
        inputs: MeshInputs,
        plan: SamplingPlan,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Per-face saliency predictions (F,) as a graph-connected Tensor."""
        cfg = self.config
        x = self._fused_inputs(inputs)
        if cfg.use_graph_conv:
            emb = graph_conv_forward(
                x, inputs.mesh.adjacency, self.params, cfg.conv_layers, cfg.activation
            )
        else:
            emb = nn.activation(cfg.activation)(nn.linear(x, self.params, "enc_lin"))

        seq = embed_patches(
            plan.subgraphs, emb, self.params, plan.centers_xyz, cfg.subgraph_len
        )
        z = stack_blocks(
            seq.initial(),
            self.blocks,
            self.params,
            use_diffusion=cfg.use_diffusion,
            use_forward=cfg.use_ssm_forward,
            use_backward=cfg.use_ssm_backward,
            rng=rng,
        )
        patch_out = z[1:]  # drop the aggregate token; dense outputs come from patches
        feats = propagate(patch_out, plan.prop_idx, plan.prop_w)
        return predict_head(feats, self.params)

    def predict(self, mesh: TriMesh, seed: int = 0) -> SaliencyMap:
        """Inference: grad-free forward with a plan derived from ``seed``."""
        inputs = self.prepare(mesh)
        plan = self.sample_plan(mesh, seed)
        with ad.no_grad():
            pred = self.forward(inputs, plan)
        return SaliencyMap(
            np.maximum(pred.data, 0.0),
            mesh.n_faces,
            kind="prediction",
            normalization="none",
            params={"seed": seed, "config_mode": self.config.input_mode},
        )

    # -- parameter access -----------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        for k, v in self.params.items():
            if k not in state:
                raise ConfigError(f"checkpoint missing parameter {k!r}")
            if state[k].shape != v.data.shape:
                raise ConfigError(
                    f"checkpoint shape mismatch for {k!r}: {state[k].shape} vs {v.data.shape}"
                )
            v.data = state[k].astype(np.float64).copy()


def measure_flops(model: SaliencyModel, mesh: TriMesh, seed: int = 0) -> float:
    """Floating point work of one grad-free forward pass."""
    inputs = model.prepare(mesh)
    plan = model.sample_plan(mesh, seed)
    with ad.no_grad():
        with ad.count_flops() as counter:
            model.forward(inputs, plan)
    return counter.flops
