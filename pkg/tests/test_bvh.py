from __future__ import annotations

import numpy as np
import pytest

from meshsal.bvh import build_bvh, cast_ray, cast_ray_linear, intersect_ray_triangle
from meshsal.mesh import make_mesh
from meshsal.synth import icosphere


def oracle_plane_barycentric(o, d, v0, v1, v2, eps=1e-9):
    """Independent ray/triangle test: plane intersection then barycentric check."""
    n = np.cross(v1 - v0, v2 - v0)
    denom = float(n @ d)
    if abs(denom) < 1e-12:
        return None
    t = float(n @ (v0 - o)) / denom
    if t <= eps:
        return None
    p = o + t * d
    basis = np.stack([v1 - v0, v2 - v0], axis=1)
    uv, residual, *_ = np.linalg.lstsq(basis, p - v0, rcond=None)
    u, v = float(uv[0]), float(uv[1])
    if u < 0.0 or v < 0.0 or u + v > 1.0:
        return None
    return t, u, v


def test_axis_aligned_hit():
    hit = intersect_ray_triangle(
        np.array([0.2, 0.2, 1.0]),
        np.array([0.0, 0.0, -1.0]),
        np.array([0.0, 0.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
    )
    assert hit is not None
    t, u, v = hit
    assert t == pytest.approx(1.0, abs=1e-12)
    point = np.array([0.2, 0.2, 1.0]) + t * np.array([0, 0, -1.0])
    assert np.allclose(point, [0.2, 0.2, 0.0], atol=1e-12)


def test_parallel_ray_misses():
    hit = intersect_ray_triangle(
        np.array([0.0, 0.0, 1.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
    )
    assert hit is None


def test_degenerate_triangle_misses():
    hit = intersect_ray_triangle(
        np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 0.0, -1.0]),
        np.array([0.0, 0.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([2.0, 0.0, 0.0]),
    )
    assert hit is None


def test_moller_trumbore_vs_plane_barycentric_oracle(rng):
    tri = rng.normal(size=(3, 3))
    hits = misses = 0
    for _ in range(1000):
        o = rng.normal(size=3) * 2.0
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        ours = intersect_ray_triangle(o, d, tri[0], tri[1], tri[2])
        ref = oracle_plane_barycentric(o, d, tri[0], tri[1], tri[2])
        assert (ours is None) == (ref is None)
        if ours is not None:
            assert ours[0] == pytest.approx(ref[0], abs=1e-9)
            hits += 1
        else:
            misses += 1
    assert hits > 0 and misses > 0


def test_single_face_mesh_single_leaf():
    mesh = make_mesh(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float), np.array([[0, 1, 2]])
    )
    bvh = build_bvh(mesh)
    assert len(bvh.count) == 1
    assert bvh.count[0] == 1


def test_root_box_contains_all_faces(cube):
    bvh = build_bvh(cube, leaf_size=2)
    tri = cube.face_corner_positions()
    assert np.all(tri.min(axis=(0, 1)) >= bvh.bounds_min[0] - 1e-12)
    assert np.all(tri.max(axis=(0, 1)) <= bvh.bounds_max[0] + 1e-12)


def test_bvh_matches_linear_scan(sphere, rng):
    bvh = build_bvh(sphere, leaf_size=4)
    hits = 0
    for i in range(2000):
        o = rng.normal(size=3) * 2.5
        if i % 2 == 0:
            d = rng.normal(size=3)  # random direction, mostly misses
        else:
            d = rng.normal(size=3) * 0.2 - o  # roughly toward the sphere
        d /= np.linalg.norm(d)
        fast = cast_ray(bvh, sphere, o, d)
        slow = cast_ray_linear(sphere, o, d)
        assert (fast is None) == (slow is None)
        if fast is not None:
            hits += 1
            assert fast.face == slow.face
            assert fast.t == slow.t
    assert hits > 500


def test_rays_from_inside_hit(sphere):
    bvh = build_bvh(sphere)
    hit = cast_ray(bvh, sphere, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert hit is not None
    assert hit.t == pytest.approx(1.0, abs=0.05)  # unit icosphere radius


def test_axis_aligned_direction_zero_components():
    mesh = icosphere(1)
    bvh = build_bvh(mesh, leaf_size=2)
    for axis in range(3):
        d = np.zeros(3)
        d[axis] = -1.0
        o = np.zeros(3)
        o[axis] = 3.0
        fast = cast_ray(bvh, mesh, o, d)
        slow = cast_ray_linear(mesh, o, d)
        assert fast is not None and slow is not None
        assert fast.face == slow.face and fast.t == slow.t
