from __future__ import annotations

import numpy as np
import pytest

from meshsal.bvh import build_bvh
from meshsal.errors import MeshFormatError, NoFixationHitError
from meshsal.gaze import (
    Fixation,
    GazeParams,
    GazeSample,
    build_saliency_map,
    classify_fixations,
    cone_ray_directions,
    locate_fixation,
    read_gaze_log,
    splat_fixation_cone,
    write_gaze_log,
)
from meshsal.mesh import make_mesh
from meshsal.saliency import load_saliency_map, save_saliency_map


def constant_samples(n, t0=0.0, rate=120.0, direction=(0, 0, -1.0), origin=(0.5, 0.5, 3.0)):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return [
        GazeSample(t0 + i / rate, np.asarray(origin, dtype=float), d.copy(), d.copy())
        for i in range(n)
    ]


def sweeping_samples(n, deg_per_s=90.0, rate=120.0):
    out = []
    for i in range(n):
        t = i / rate
        ang = np.radians(deg_per_s * t)
        d = np.array([np.sin(ang), 0.0, -np.cos(ang)])
        out.append(GazeSample(t, np.array([0.5, 0.5, 3.0]), d, d.copy()))
    return out


def wall_mesh(size=10.0):
    """Two big triangles forming a wall in the z=0 plane."""
    s = size
    verts = np.array([[-s, -s, 0], [s, -s, 0], [s, s, 0], [-s, s, 0]], dtype=float)
    return make_mesh(verts, np.array([[0, 1, 2], [0, 2, 3]]))


def test_constant_gaze_single_fixation():
    samples = constant_samples(37)  # 300 ms at 120 Hz
    fixations = classify_fixations(samples)
    assert len(fixations) == 1
    assert fixations[0].duration == pytest.approx(0.3, abs=1e-9)


def test_fast_sweep_yields_no_fixation():
    fixations = classify_fixations(sweeping_samples(60, deg_per_s=90.0))
    assert fixations == []


def test_two_stable_segments_with_saccade():
    a = constant_samples(30, t0=0.0, direction=(0, 0, -1))
    # Saccade: three samples moving ~8.6 deg per sample at 120 Hz (>1000 deg/s).
    saccade = []
    for k, ang in enumerate((0.15, 0.3, 0.45)):
        d = np.array([np.sin(ang), 0.0, -np.cos(ang)])
        saccade.append(GazeSample(30 / 120.0 + k / 120.0, np.array([0.5, 0.5, 3.0]), d, d.copy()))
    b_dir = np.array([np.sin(0.6), 0.0, -np.cos(0.6)])
    b = [
        GazeSample((34 + i) / 120.0, np.array([0.5, 0.5, 3.0]), b_dir.copy(), b_dir.copy())
        for i in range(30)
    ]
    fixations = classify_fixations(a + saccade + b)
    assert len(fixations) == 2
    assert np.allclose(fixations[0].mean_direction, [0, 0, -1])
    assert np.allclose(fixations[1].mean_direction, b_dir)


def test_short_runs_below_min_duration_excluded():
    samples = constant_samples(6)  # ~42 ms < 100 ms
    assert classify_fixations(samples) == []


def test_time_shift_invariance():
    base = constant_samples(37)
    shifted = [
        GazeSample(s.timestamp + 1234.5, s.gaze_origin, s.gaze_direction, s.head_direction)
        for s in base
    ]
    f0 = classify_fixations(base)
    f1 = classify_fixations(shifted)
    assert len(f0) == len(f1) == 1
    assert f1[0].duration == pytest.approx(f0[0].duration)


def test_cone_directions_within_aperture():
    dirs, offsets = cone_ray_directions(np.array([0.3, -0.4, 0.86]), 1.0, 128)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    assert offsets.max() <= 1.0 + 1e-9
    assert offsets.min() >= 0.0


def test_splat_concentrates_on_hit_face():
    mesh = wall_mesh()
    bvh = build_bvh(mesh)
    fix = Fixation(0.0, 0.3, np.array([-1.0, -1.0, 5.0]), np.array([0.0, 0.0, -1.0]))
    locate_fixation(bvh, mesh, fix)
    assert fix.hit_face is not None
    inc = splat_fixation_cone(mesh, bvh, fix)
    assert inc.sum() > 0
    assert np.argmax(inc) == fix.hit_face


def test_splat_away_from_mesh_is_zero():
    mesh = wall_mesh()
    bvh = build_bvh(mesh)
    fix = Fixation(0.0, 0.3, np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, 1.0]))
    locate_fixation(bvh, mesh, fix)
    assert fix.hit_face is None
    inc = splat_fixation_cone(mesh, bvh, fix)
    assert np.all(inc == 0.0)


def test_splat_additivity():
    mesh = wall_mesh()
    bvh = build_bvh(mesh)
    fix = Fixation(0.0, 0.3, np.array([0.2, 0.1, 5.0]), np.array([0.0, 0.0, -1.0]))
    locate_fixation(bvh, mesh, fix)
    one = splat_fixation_cone(mesh, bvh, fix)
    assert np.allclose(one + one, 2.0 * one)


def test_build_map_normalization_and_session_permutation():
    mesh = wall_mesh()
    s1 = constant_samples(37, origin=(-3.0, -3.0, 5.0))
    s2 = constant_samples(25, origin=(3.0, 3.0, 5.0))
    raw_a, dist_a = build_saliency_map(mesh, [s1, s2])
    raw_b, dist_b = build_saliency_map(mesh, [s2, s1])
    assert dist_a.values.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(raw_a.values, raw_b.values)
    assert np.all(raw_a.values >= 0.0)


def test_build_map_no_hits_errors():
    mesh = wall_mesh()
    looking_away = constant_samples(37, direction=(0, 0, 1.0))
    with pytest.raises(NoFixationHitError):
        build_saliency_map(mesh, [looking_away])


def test_tiny_sigma_map_is_indicator():
    mesh = wall_mesh()
    params = GazeParams(sigma_deg=1e-4)
    samples = constant_samples(37, origin=(-2.0, -2.0, 5.0))
    raw, dist = build_saliency_map(mesh, [samples], params)
    # With negligible sigma all surviving weight sits on the central face.
    assert dist.values.max() == pytest.approx(1.0, abs=1e-6)


def test_gaze_log_roundtrip_and_header(tmp_path):
    samples = constant_samples(10)
    path = tmp_path / "log.csv"
    write_gaze_log(path, samples)
    loaded = read_gaze_log(path)
    assert len(loaded) == 10
    assert np.allclose(loaded[3].gaze_direction, samples[3].gaze_direction)
    bad = tmp_path / "bad.csv"
    bad.write_text("time,x\n0,1\n")
    with pytest.raises(MeshFormatError):
        read_gaze_log(bad)


def test_yaw_derotation(tmp_path):
    # Model yawed +90 degrees about +Y; a world ray along -x maps to model -z.
    path = tmp_path / "yaw.csv"
    rows = ["t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg"]
    for i in range(3):
        rows.append(f"{i / 120.0},0,0,3,-1,0,0,-1,0,0,90")
    path.write_text("\n".join(rows) + "\n")
    samples = read_gaze_log(path)
    assert np.allclose(samples[0].gaze_direction, [0, 0, -1.0], atol=1e-12)


def test_nonmonotonic_timestamps_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg\n"
        "0.0,0,0,3,0,0,-1,0,0,-1,0\n"
        "0.0,0,0,3,0,0,-1,0,0,-1,0\n"
    )
    with pytest.raises(MeshFormatError, match="strictly increase"):
        read_gaze_log(path)


def test_saliency_map_file_roundtrip(tmp_path):
    mesh = wall_mesh()
    raw, dist = build_saliency_map(mesh, [constant_samples(37, origin=(-1, -1, 5.0))])
    path = tmp_path / "map.txt"
    save_saliency_map(dist, path)
    loaded = load_saliency_map(path)
    assert loaded.mesh_face_count == mesh.n_faces
    assert loaded.normalization == "sum"
    assert np.array_equal(loaded.values, dist.values)
    assert loaded.params["aperture_deg"] == 1.0


def test_fewer_than_two_samples_no_fixations():
    assert classify_fixations([]) == []
    single = constant_samples(1)
    assert classify_fixations(single) == []
