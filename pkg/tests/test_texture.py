from __future__ import annotations

import numpy as np
import pytest

from meshsal.errors import ConfigError
from meshsal.mesh import make_mesh
from meshsal.texture import (
    EncoderConfig,
    LatentCodeMap,
    TextureImage,
    cached_encode_texture,
    encode_texture,
    face_feature_grid,
    face_window,
    pool_face_feature,
    pooled_face_features,
    sample_latent,
    sample_latent_many,
)


def uv_triangle_mesh(uv_tri):
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    uvs = np.asarray(uv_tri, dtype=float)[None, :, :]
    return make_mesh(verts, np.array([[0, 1, 2]]), uvs=uvs)


def checker_image(h=8, w=8):
    data = np.zeros((h, w, 3))
    for y in range(h):
        for x in range(w):
            data[y, x] = (x + y) % 2
    return TextureImage(data)


def test_identity_encoder_passes_pixels():
    img = checker_image()
    latent = encode_texture(img, EncoderConfig(mode="identity"))
    assert latent.dim == 3
    assert np.array_equal(latent.codes, img.data)


def test_conv_encoder_constant_image_constant_codes():
    img = TextureImage(np.full((6, 7, 3), 0.42))
    latent = encode_texture(img, EncoderConfig(mode="conv", dim=5, seed=1))
    assert latent.dim == 5
    assert np.allclose(latent.codes, latent.codes[0, 0])


def test_conv_encoder_deterministic():
    img = checker_image()
    cfg = EncoderConfig(mode="conv", dim=4, seed=7)
    a = encode_texture(img, cfg)
    b = encode_texture(img, cfg)
    assert np.array_equal(a.codes, b.codes)


def test_unknown_encoder_mode():
    with pytest.raises(ConfigError):
        encode_texture(checker_image(), EncoderConfig(mode="fourier"))


def test_sample_at_cell_center_exact():
    latent = LatentCodeMap(np.arange(12.0).reshape(3, 4, 1))
    # center of cell (row 1, col 2): u = 2.5/4, v = 1.5/3
    val = sample_latent(latent, np.array([2.5 / 4, 1.5 / 3]))
    assert val[0] == pytest.approx(latent.codes[1, 2, 0], abs=1e-12)


def test_sample_midway_between_cells():
    codes = np.zeros((1, 2, 1))
    codes[0, 1, 0] = 1.0
    latent = LatentCodeMap(codes)
    # midway between the two cell centers: u = 0.5
    val = sample_latent(latent, np.array([0.5, 0.5]))
    assert val[0] == pytest.approx(0.5, abs=1e-12)


def test_sample_at_mutual_corner_averages_four():
    codes = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])  # 2x2
    latent = LatentCodeMap(codes)
    val = sample_latent(latent, np.array([0.5, 0.5]))
    assert val[0] == pytest.approx(2.5, abs=1e-12)


def test_sampling_is_lipschitz_continuous(rng):
    latent = LatentCodeMap(rng.uniform(size=(9, 11, 2)))
    # Bilinear interpolation changes at most (grid cells crossed) * code range.
    lip = (latent.width + latent.height) * 1.0
    uv = rng.uniform(0.1, 0.9, size=(200, 2))
    delta = rng.normal(size=(200, 2)) * 1e-4
    a = sample_latent_many(latent, uv)
    b = sample_latent_many(latent, uv + delta)
    step = np.linalg.norm(delta, axis=1)
    assert np.all(np.linalg.norm(a - b, axis=1) <= lip * step + 1e-12)


def test_face_grid_constant_texture():
    mesh = uv_triangle_mesh([[0.2, 0.2], [0.8, 0.2], [0.2, 0.8]])
    latent = LatentCodeMap(np.full((8, 8, 3), 0.7))
    grid = face_feature_grid(mesh, latent, 0, density=4)
    assert grid.grid.shape == (4, 4, 3)
    assert np.allclose(grid.grid, 0.7)


def test_equilateral_uv_near_unit_aspect():
    mesh = uv_triangle_mesh([[0.2, 0.2], [0.6, 0.2], [0.4, 0.2 + 0.4 * np.sqrt(3) / 2]])
    _, _, factors = face_window(mesh, 0)
    assert factors[0] == pytest.approx(1.0, abs=1e-12)
    assert 1.0 <= factors[1] < 1.2


def test_thin_triangle_aspect_correction():
    # UV bounding box 0.4 wide, 0.1 tall: aspect 4:1.
    mesh = uv_triangle_mesh([[0.3, 0.45], [0.7, 0.45], [0.5, 0.55]])
    center, side, factors = face_window(mesh, 0)
    assert side == pytest.approx(0.4, abs=1e-12)
    assert factors[0] == pytest.approx(1.0, abs=1e-9)
    assert factors[1] == pytest.approx(4.0, abs=1e-9)
    # Sample spacing must be isotropic: derived directly from the UV box.
    latent = LatentCodeMap(np.zeros((16, 16, 1)))
    g = 8
    offs = ((np.arange(g) + 0.5) / g - 0.5) * side
    du = offs[1] - offs[0]
    grid = face_feature_grid(mesh, latent, 0, density=g)
    assert grid.aspect_meta == (pytest.approx(1.0), pytest.approx(4.0))
    assert du == pytest.approx(side / g, abs=1e-6)


def test_degenerate_uv_falls_back_to_centroid():
    mesh = uv_triangle_mesh([[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]])
    latent = LatentCodeMap(np.arange(64.0).reshape(8, 8, 1) / 64.0)
    grid = face_feature_grid(mesh, latent, 0, density=4)
    assert np.allclose(grid.grid, grid.grid[0, 0])


def test_pooling_modes():
    grid_vals = np.full((4, 4, 1), 0.1)
    grid_vals[2, 3, 0] = 0.9
    from meshsal.texture import FaceFeatureGrid

    grid = FaceFeatureGrid(face=0, grid=grid_vals, aspect_meta=(1.0, 1.0))
    assert pool_face_feature(grid, "max")[0] == pytest.approx(0.9)
    half = np.concatenate([np.zeros((2, 4, 1)), np.ones((2, 4, 1))])
    grid2 = FaceFeatureGrid(face=0, grid=half, aspect_meta=(1.0, 1.0))
    assert pool_face_feature(grid2, "mean")[0] == pytest.approx(0.5)
    allsame = FaceFeatureGrid(face=0, grid=np.full((3, 3, 2), 0.3), aspect_meta=(1.0, 1.0))
    assert np.allclose(pool_face_feature(allsame, "mean"), 0.3)


def test_constant_texture_identical_pooled_features():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    uvs = np.array(
        [[[0.1, 0.1], [0.6, 0.1], [0.1, 0.6]], [[0.6, 0.1], [0.9, 0.9], [0.1, 0.6]]]
    )
    mesh = make_mesh(verts, faces, uvs=uvs)
    latent = LatentCodeMap(np.full((8, 8, 3), 0.25))
    feats = pooled_face_features(mesh, latent, density=4)
    assert np.allclose(feats[0], feats[1])


def test_latent_cache_roundtrip(tmp_path):
    img = checker_image()
    cfg = EncoderConfig(mode="conv", dim=4, seed=3)
    a = cached_encode_texture(img, cfg, tmp_path)
    files = list(tmp_path.glob("latent_*.npz"))
    assert len(files) == 1
    b = cached_encode_texture(img, cfg, tmp_path)
    assert np.array_equal(a.codes, b.codes)


def test_png_roundtrip(tmp_path):
    img = checker_image()
    path = tmp_path / "t.png"
    img.to_png(path)
    back = TextureImage.from_png(path)
    assert back.data.shape == img.data.shape
    assert np.allclose(back.data, img.data, atol=1 / 255.0)
