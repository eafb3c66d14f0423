from __future__ import annotations

import numpy as np
import pytest

from meshsal import autodiff as ad
from meshsal.errors import ConfigError
from meshsal.model import ABLATION_TOGGLES, ModelConfig, SaliencyModel, apply_ablation, measure_flops
from meshsal.synth import grid_patch
from meshsal.texture import TextureImage


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        d_enc=8, conv_layers=2, n_centers=6, subgraph_len=3, d_tok=12, n_state=4,
        n_blocks=1, pseudo_neighbors=2, head_hidden=8, param_seed=5,
    )
    base.update(overrides)
    return ModelConfig(**base)


def textured_grid(n=4):
    mesh = grid_patch(n, n, with_uvs=True)
    mesh.texture = TextureImage(np.random.default_rng(3).uniform(size=(8, 8, 3)))
    return mesh


def test_forward_shapes_and_nonnegativity(wavy_grid):
    model = SaliencyModel(tiny_config())
    inputs = model.prepare(wavy_grid)
    plan = model.sample_plan(wavy_grid, 7)
    pred = model.forward(inputs, plan)
    assert pred.shape == (wavy_grid.n_faces,)
    assert np.all(pred.data >= 0.0)


def test_forward_deterministic_given_seed(wavy_grid):
    model = SaliencyModel(tiny_config())
    inputs = model.prepare(wavy_grid)
    a = model.forward(inputs, model.sample_plan(wavy_grid, 9)).data
    b = model.forward(inputs, model.sample_plan(wavy_grid, 9)).data
    assert np.array_equal(a, b)


def test_predict_returns_map(wavy_grid):
    model = SaliencyModel(tiny_config())
    smap = model.predict(wavy_grid, seed=1)
    assert smap.mesh_face_count == wavy_grid.n_faces
    assert smap.kind == "prediction"


def test_all_ablation_toggles_forward(wavy_grid):
    for toggle in ABLATION_TOGGLES:
        cfg = apply_ablation(tiny_config(), toggle)
        if toggle == "texture":
            assert cfg.input_mode == "geometry"
        model = SaliencyModel(cfg)
        inputs = model.prepare(wavy_grid)
        plan = model.sample_plan(wavy_grid, 3)
        pred = model.forward(inputs, plan)
        assert pred.shape == (wavy_grid.n_faces,)


def test_unknown_toggle_rejected():
    with pytest.raises(ConfigError):
        apply_ablation(tiny_config(), "everything")


def test_texture_mode_learnable_encoder():
    mesh = textured_grid()
    cfg = tiny_config(input_mode="texture", encoder_mode="conv", encoder_dim=4, grid_density=4)
    model = SaliencyModel(cfg, texture_channels=3)
    inputs = model.prepare(mesh)
    plan = model.sample_plan(mesh, 2)
    pred = model.forward(inputs, plan)
    loss = pred.sum()
    loss.backward()
    assert model.params["tex.kernel"].grad is not None
    assert np.abs(model.params["tex.kernel"].grad).sum() > 0


def test_texture_mode_requires_texture(wavy_grid):
    cfg = tiny_config(input_mode="texture")
    model = SaliencyModel(cfg)
    with pytest.raises(ConfigError):
        model.prepare(wavy_grid)


def test_all_features_disabled_rejected():
    with pytest.raises(ConfigError):
        SaliencyModel(tiny_config(use_spatial=False, use_curve=False, use_shape=False))


def test_knn_sampler_variant_runs(wavy_grid):
    cfg = tiny_config(subgraph_sampler="knn")
    model = SaliencyModel(cfg)
    pred = model.forward(model.prepare(wavy_grid), model.sample_plan(wavy_grid, 4))
    assert np.all(np.isfinite(pred.data))


def test_measure_flops_positive_and_scales(wavy_grid):
    small = measure_flops(SaliencyModel(tiny_config(n_centers=6)), wavy_grid, 0)
    big = measure_flops(SaliencyModel(tiny_config(n_centers=24)), wavy_grid, 0)
    assert small > 0
    assert big > small


def test_state_roundtrip_preserves_forward(wavy_grid):
    model = SaliencyModel(tiny_config())
    inputs = model.prepare(wavy_grid)
    plan = model.sample_plan(wavy_grid, 11)
    with ad.no_grad():
        before = model.forward(inputs, plan).data
    state = model.state_arrays()
    fresh = SaliencyModel(tiny_config(param_seed=99))
    fresh.load_state_arrays(state)
    with ad.no_grad():
        after = fresh.forward(fresh.prepare(wavy_grid), fresh.sample_plan(wavy_grid, 11)).data
    assert np.array_equal(before, after)
