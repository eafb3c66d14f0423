from __future__ import annotations

import json

import pytest

from meshsal.config import config_hash, load_config, write_manifest
from meshsal.errors import ConfigError
from meshsal.subgraph import Subgraph, dump_subgraphs
import numpy as np


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg["model"].n_centers == 128
    assert cfg["model"].subgraph_len == 32
    assert cfg["train"].lr == 1e-3
    assert cfg["train"].epochs == 150
    assert cfg["gaze"].aperture_deg == 1.0


def test_ini_overrides(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(
        "[model]\nn_centers = 32\nuse_shape = false\ninput_mode = color\n"
        "[train]\nlr = 5e-4\nepochs = 10\nresample_walks = off\n"
        "[gaze]\nsigma_deg = 0.25\nray_count = 16\n"
    )
    cfg = load_config(path)
    assert cfg["model"].n_centers == 32
    assert cfg["model"].use_shape is False
    assert cfg["model"].input_mode == "color"
    assert cfg["train"].lr == pytest.approx(5e-4)
    assert cfg["train"].resample_walks is False
    assert cfg["gaze"].sigma_deg == pytest.approx(0.25)
    assert cfg["gaze"].ray_count == 16


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[model]\nwarp_factor = 9\n")
    with pytest.raises(ConfigError, match="warp_factor"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[rendering]\nx = 1\n")
    with pytest.raises(ConfigError, match="rendering"):
        load_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_config_hash_stability():
    a = config_hash({"b": 2, "a": 1})
    b = config_hash({"a": 1, "b": 2})
    assert a == b
    assert a != config_hash({"a": 1, "b": 3})


def test_manifest_deterministic(tmp_path):
    out = tmp_path / "thing.txt"
    out.write_text("x")
    p1 = write_manifest(out, "gen-gt", {"seed": 1}, 1, {"k": "v"})
    first = p1.read_bytes()
    p2 = write_manifest(out, "gen-gt", {"seed": 1}, 1, {"k": "v"})
    assert p2.read_bytes() == first
    payload = json.loads(first)
    assert payload["command"] == "gen-gt"
    assert "versions" in payload


def test_subgraph_dump(tmp_path):
    sgs = [
        Subgraph(center=3, members=np.array([3, 4, 5])),
        Subgraph(center=9, members=np.array([9, 2])),
    ]
    path = tmp_path / "subgraphs.txt"
    dump_subgraphs(path, sgs)
    assert path.read_text() == "3 4 5\n9 2\n"
