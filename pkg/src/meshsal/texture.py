"""Texture features: latent code maps, sub-pixel sampling and per-face grids.

A texture image is encoded into a latent code map aligned cell-for-cell with
the pixel grid.  Queries at arbitrary UV positions blend the four surrounding
cell codes bilinearly, so features vary continuously across a face.  Each face
gets a square GxG sampling window centered on its UV triangle, with the short
axis of the window stretched to match the long one so sample spacing is the
same in both directions; samples that land outside the triangle simply read
the surrounding latent map.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, MeshSalError
from .mesh import TriMesh


@dataclass
class TextureImage:
    """Raster image as (H, W, C) float64 in [0, 1], rows stored bottom-up.

    Row 0 corresponds to v = 0, so UV (0, 0) addresses data[0, 0].
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        if self.data.ndim != 3 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(f"texture data must be (H, W, C), got {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_png(cls, path: str | Path) -> "TextureImage":
        from PIL import Image

        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        return cls(arr[::-1].copy())  # flip to bottom-up rows

    def to_png(self, path: str | Path) -> None:
        from PIL import Image

        arr = np.clip(self.data[::-1], 0.0, 1.0)
        if arr.shape[2] == 1:
            arr = np.repeat(arr, 3, axis=2)
        Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)

    def content_hash(self) -> str:
        return hashlib.sha256(self.data.tobytes()).hexdigest()


@dataclass
class LatentCodeMap:
    """Feature grid spatially aligned with a texture image (same UV mapping)."""

    codes: np.ndarray  # (H, W, D)

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def dim(self) -> int:
        return self.codes.shape[2]


@dataclass
class EncoderConfig:
    """Texture encoder: 'identity' passes raw channels through; 'conv' applies
    a small seeded 3x3 convolution stack with softplus activations."""

    mode: str = "identity"
    dim: int = 8  # output feature dim (conv mode)
    seed: int = 0

    def as_dict(self) -> dict:
        return {"mode": self.mode, "dim": self.dim, "seed": self.seed}


@dataclass
class FaceFeatureGrid:
    """GxG feature samples covering one face's UV window."""

    face: int
    grid: np.ndarray  # (G, G, D)
    aspect_meta: tuple[float, float]  # (horizontal, vertical) extension factors


def conv3x3_indices(h: int, w: int) -> np.ndarray:
    """(H*W, 9) flat indices of each cell's 3x3 neighborhood with wrap padding."""
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    idx = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            idx.append(((ys + dy) % h) * w + (xs + dx) % w)
    return np.stack(idx, axis=-1).reshape(h * w, 9)


def conv_encoder_kernel(channels: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded 3x3 kernel (9*C, dim) and bias (dim,) for the frozen conv encoder."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 9, channels, dim]))
    scale = 1.0 / np.sqrt(9 * channels)
    return rng.normal(0.0, scale, size=(9 * channels, dim)), np.zeros(dim)


def encode_texture(image: TextureImage, cfg: EncoderConfig | None = None) -> LatentCodeMap:
    """Deterministic latent code map for an image.

    Identity mode returns the raw pixel channels.  Conv mode applies the
    seeded 3x3 convolution with wrap padding followed by softplus, keeping the
    map the same height/width as the image.
    """
    cfg = cfg or EncoderConfig()
    h, w, c = image.data.shape
    if cfg.mode == "identity":
        return LatentCodeMap(image.data.copy())
    if cfg.mode == "conv":
        if c < 1:
            raise ConfigError("conv encoder needs at least one channel")
        kernel, bias = conv_encoder_kernel(c, cfg.dim, cfg.seed)
        flat = image.data.reshape(h * w, c)
        patches = flat[conv3x3_indices(h, w)].reshape(h * w, 9 * c)
        pre = patches @ kernel + bias
        codes = np.logaddexp(0.0, pre).reshape(h, w, cfg.dim)
        return LatentCodeMap(codes)
    raise ConfigError(f"unknown texture encoder mode {cfg.mode!r}")


def bilinear_weights(h: int, w: int, uvs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat cell indices (K, 4) and blend weights (K, 4) for UV queries.

    Cell centers sit at ((i + 0.5) / W, (j + 0.5) / H); out-of-range
    coordinates wrap (repeat mode).  A query at a cell center gets weight 1 on
    that cell.
    """
    uvs = np.asarray(uvs, dtype=np.float64)
    x = uvs[:, 0] * w - 0.5
    y = uvs[:, 1] * h - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix0 = (x0.astype(np.int64)) % w
    iy0 = (y0.astype(np.int64)) % h
    ix1 = (ix0 + 1) % w
    iy1 = (iy0 + 1) % h
    idx = np.stack(
        [iy0 * w + ix0, iy0 * w + ix1, iy1 * w + ix0, iy1 * w + ix1], axis=1
    )
    wts = np.stack(
        [(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=1
    )
    return idx, wts


def sample_latent_many(latent: LatentCodeMap, uvs: np.ndarray) -> np.ndarray:
    """Bilinear samples of the latent map at (K, 2) UV positions -> (K, D)."""
    idx, wts = bilinear_weights(latent.height, latent.width, uvs)
    flat = latent.codes.reshape(-1, latent.dim)
    return np.einsum("kj,kjd->kd", wts, flat[idx])


def sample_latent(latent: LatentCodeMap, uv: np.ndarray) -> np.ndarray:
    """Single bilinear query; blends the four surrounding cell codes."""
    return sample_latent_many(latent, np.asarray(uv, dtype=np.float64)[None, :])[0]


def face_window(mesh: TriMesh, face: int) -> tuple[np.ndarray, float, tuple[float, float]]:
    """Square UV sampling window for a face: (center, side, extension factors).

    The window is the face's UV bounding box grown along its short axis until
    square, so sample spacing is isotropic.  Returns side 0 for a degenerate
    (pointlike) UV triangle.
    """
    if mesh.uvs is None:
        raise MeshSalError("mesh has no UV coordinates")
    tri = mesh.uvs[face]
    lo = tri.min(axis=0)
    hi = tri.max(axis=0)
    extent = hi - lo
    side = float(extent.max())
    center = 0.5 * (lo + hi)
    factors = np.where(extent > 0.0, side / np.where(extent > 0.0, extent, 1.0), np.inf)
    return center, side, (float(factors[0]), float(factors[1]))


def face_feature_grid(
    mesh: TriMesh, latent: LatentCodeMap, face: int, density: int = 8
) -> FaceFeatureGrid:
    """GxG uniform feature samples over the face's aspect-corrected UV window.

    Samples outside the triangle read the surrounding latent map; a degenerate
    UV triangle collapses to its centroid sample replicated across the grid.
    """
    center, side, factors = face_window(mesh, face)
    g = density
    if side <= 0.0:
        value = sample_latent(latent, mesh.uvs[face].mean(axis=0))
        grid = np.broadcast_to(value, (g, g, latent.dim)).copy()
        return FaceFeatureGrid(face=face, grid=grid, aspect_meta=(1.0, 1.0))
    offs = ((np.arange(g) + 0.5) / g - 0.5) * side
    uu, vv = np.meshgrid(offs, offs, indexing="xy")
    # Windows crossing the [0,1] border rely on the sampler's repeat wrapping.
    uvs = np.stack([center[0] + uu.ravel(), center[1] + vv.ravel()], axis=1)
    samples = sample_latent_many(latent, uvs).reshape(g, g, latent.dim)
    return FaceFeatureGrid(face=face, grid=samples, aspect_meta=factors)


def pool_face_feature(grid: FaceFeatureGrid, mode: str = "mean") -> np.ndarray:
    """Reduce a face grid to one feature vector (mean or max over cells)."""
    flat = grid.grid.reshape(-1, grid.grid.shape[-1])
    if mode == "mean":
        return flat.mean(axis=0)
    if mode == "max":
        return flat.max(axis=0)
    raise ConfigError(f"unknown pooling mode {mode!r}")


def pooled_face_features(
    mesh: TriMesh, latent: LatentCodeMap, density: int = 8, mode: str = "mean"
) -> np.ndarray:
    """(F, D) pooled texture features for every face."""
    if mesh.uvs is None:
        raise MeshSalError("mesh has no UV coordinates")
    out = np.empty((mesh.n_faces, latent.dim))
    for f in range(mesh.n_faces):
        out[f] = pool_face_feature(face_feature_grid(mesh, latent, f, density), mode)
    return out


# -- latent map cache ---------------------------------------------------------


def latent_cache_key(image: TextureImage, cfg: EncoderConfig) -> str:
    blob = image.content_hash() + json.dumps(cfg.as_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def cached_encode_texture(
    image: TextureImage, cfg: EncoderConfig, cache_dir: str | Path
) -> LatentCodeMap:
    """Encode with a binary sidecar cache keyed by texture and encoder hashes."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"latent_{latent_cache_key(image, cfg)}.npz"
    if path.exists():
        with np.load(path) as data:
            return LatentCodeMap(data["codes"])
    latent = encode_texture(image, cfg)
    np.savez_compressed(path, codes=latent.codes)
    return latent
