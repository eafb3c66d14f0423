"""Gaze-log ingestion, fixation classification and cone splatting.

Raw logs are CSV with header ``t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg``: time,
gaze origin, gaze direction, head direction, and the model's yaw at that
instant (the capture rig rotates the model about +Y).  The loader de-rotates
every ray into the model frame, so everything downstream works in model space.

Fixations are found by velocity thresholding: runs of samples whose angular
velocity stays below a threshold, lasting at least a minimum duration.  Each
fixation is expanded into a narrow cone of rays with Gaussian angular falloff
and the per-ray weights are accumulated on the faces they hit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh, cast_ray
from .errors import MeshFormatError, NoFixationHitError
from .mesh import TriMesh
from .saliency import SaliencyMap

GAZE_LOG_COLUMNS = ["t", "ox", "oy", "oz", "gx", "gy", "gz", "hx", "hy", "hz", "yaw_deg"]

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass
class GazeSample:
    """One gaze measurement in the model frame."""

    timestamp: float
    gaze_origin: np.ndarray  # (3,)
    gaze_direction: np.ndarray  # (3,) unit
    head_direction: np.ndarray  # (3,) unit


@dataclass
class Fixation:
    """A stable-gaze interval with its (optional) mesh intersection."""

    start: float
    end: float
    mean_origin: np.ndarray
    mean_direction: np.ndarray
    hit_face: int | None = None
    hit_point: np.ndarray | None = None

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class GazeParams:
    """Knobs of the log-to-map pipeline; all recorded in output metadata."""

    velocity_threshold_deg: float = 30.0  # I-VT split between fixation and saccade
    min_duration_s: float = 0.1
    aperture_deg: float = 1.0  # cone half-angle
    sigma_deg: float | None = None  # Gaussian angular falloff; default aperture / 2
    ray_count: int = 64

    @property
    def sigma(self) -> float:
        return self.sigma_deg if self.sigma_deg is not None else 0.5 * self.aperture_deg

    def as_dict(self) -> dict:
        return {
            "velocity_threshold_deg": self.velocity_threshold_deg,
            "min_duration_s": self.min_duration_s,
            "aperture_deg": self.aperture_deg,
            "sigma_deg": self.sigma,
            "ray_count": self.ray_count,
        }


def _yaw_matrix(yaw_deg: float) -> np.ndarray:
    """Rotation about +Y that maps world-frame rays into the model frame."""
    a = np.radians(-yaw_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero-length direction")
    return v / n


def read_gaze_log(path: str | Path, apply_model_yaw: bool = True) -> list[GazeSample]:
    """Parse a gaze CSV and de-rotate rays into the model frame."""
    samples: list[GazeSample] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GAZE_LOG_COLUMNS:
            raise MeshFormatError(f"{path}: expected header {','.join(GAZE_LOG_COLUMNS)}")
        prev_t = -np.inf
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(x) for x in row]
            except ValueError as exc:
                raise MeshFormatError(f"{path}: line {line_no}: {exc}") from exc
            if len(vals) != len(GAZE_LOG_COLUMNS):
                raise MeshFormatError(f"{path}: line {line_no}: expected {len(GAZE_LOG_COLUMNS)} fields")
            t = vals[0]
            if t <= prev_t:
                raise MeshFormatError(f"{path}: line {line_no}: timestamps must strictly increase")
            prev_t = t
            origin = np.array(vals[1:4])
            gaze = _unit(np.array(vals[4:7]))
            head = _unit(np.array(vals[7:10]))
            if apply_model_yaw and vals[10] != 0.0:
                rot = _yaw_matrix(vals[10])
                origin = rot @ origin
                gaze = rot @ gaze
                head = rot @ head
            samples.append(GazeSample(t, origin, gaze, head))
    return samples


def write_gaze_log(path: str | Path, samples: list[GazeSample], yaw_deg: float = 0.0) -> None:
    """Write samples (already in the model frame) as a log CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GAZE_LOG_COLUMNS)
        for s in samples:
            writer.writerow(
                ["%.17g" % s.timestamp]
                + ["%.17g" % x for x in s.gaze_origin]
                + ["%.17g" % x for x in s.gaze_direction]
                + ["%.17g" % x for x in s.head_direction]
                + ["%.17g" % yaw_deg]
            )


def angular_velocities(samples: list[GazeSample]) -> np.ndarray:
    """Per-sample angular speed in deg/s (velocity of segment i assigned to sample i).

    The last sample inherits the preceding segment's velocity.
    """
    n = len(samples)
    if n < 2:
        return np.zeros(n)
    dirs = np.array([s.gaze_direction for s in samples])
    ts = np.array([s.timestamp for s in samples])
    dots = np.clip(np.einsum("ij,ij->i", dirs[:-1], dirs[1:]), -1.0, 1.0)
    angles = np.degrees(np.arccos(dots))
    dt = np.diff(ts)
    vel = angles / dt
    return np.append(vel, vel[-1])


def classify_fixations(samples: list[GazeSample], params: GazeParams | None = None) -> list[Fixation]:
    """Velocity-threshold (I-VT) segmentation into fixations.

    Consecutive samples with angular velocity below the threshold form a run;
    runs lasting at least ``min_duration_s`` become fixations.  The fixation
    direction is the normalized sum of the run's directions.  Saccade samples
    contribute nothing.
    """
    params = params or GazeParams()
    if len(samples) < 2:
        return []
    vel = angular_velocities(samples)
    slow = vel < params.velocity_threshold_deg

    fixations: list[Fixation] = []
    i = 0
    n = len(samples)
    while i < n:
        if not slow[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and slow[j + 1]:
            j += 1
        run = samples[i : j + 1]
        duration = run[-1].timestamp - run[0].timestamp
        if duration >= params.min_duration_s:
            dir_sum = np.sum([s.gaze_direction for s in run], axis=0)
            fixations.append(
                Fixation(
                    start=run[0].timestamp,
                    end=run[-1].timestamp,
                    mean_origin=np.mean([s.gaze_origin for s in run], axis=0),
                    mean_direction=_unit(dir_sum),
                )
            )
        i = j + 1
    return fixations


def locate_fixation(bvh: Bvh, mesh: TriMesh, fixation: Fixation) -> Fixation:
    """Fill hit_face / hit_point by casting the fixation's mean ray."""
    hit = cast_ray(bvh, mesh, fixation.mean_origin, fixation.mean_direction)
    if hit is not None:
        fixation.hit_face = hit.face
        fixation.hit_point = hit.point
    return fixation


def _cone_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the plane perpendicular to ``direction``."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(direction)))] = 1.0
    u = np.cross(direction, axis)
    u /= np.linalg.norm(u)
    v = np.cross(direction, u)
    return u, v


def cone_ray_directions(direction: np.ndarray, aperture_deg: float, ray_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified ray fan inside a cone: directions (K, 3) and angular offsets (K,) in deg.

    Uses a Fibonacci spiral over the spherical cap, uniform in solid angle, so
    the fan is deterministic for a given (direction, aperture, count).
    """
    direction = _unit(np.asarray(direction, dtype=np.float64))
    cap = np.radians(aperture_deg)
    k = np.arange(ray_count)
    # cos(theta) interpolates 1 .. cos(cap) inclusive, so ray 0 is exactly the
    # fixation direction (the map degenerates to an indicator as sigma -> 0).
    frac = k / max(1, ray_count - 1)
    cos_t = 1.0 - (1.0 - np.cos(cap)) * frac
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
    phi = _GOLDEN_ANGLE * k
    u, v = _cone_basis(direction)
    dirs = (
        cos_t[:, None] * direction[None, :]
        + (sin_t * np.cos(phi))[:, None] * u[None, :]
        + (sin_t * np.sin(phi))[:, None] * v[None, :]
    )
    offsets_deg = np.degrees(np.arccos(np.clip(cos_t, -1.0, 1.0)))
    return dirs, offsets_deg


def splat_fixation_cone(
    mesh: TriMesh, bvh: Bvh, fixation: Fixation, params: GazeParams | None = None
) -> np.ndarray:
    """Per-face density increments from one fixation's Gaussian ray cone.

    Each ray carries weight exp(-offset^2 / (2 sigma^2)); weight lands on the
    face the ray hits, and rays that miss the mesh discard their weight.
    Returns all zeros when the fixation itself has no hit.
    """
    params = params or GazeParams()
    out = np.zeros(mesh.n_faces)
    if fixation.hit_face is None:
        return out
    dirs, offsets = cone_ray_directions(
        fixation.mean_direction, params.aperture_deg, params.ray_count
    )
    weights = np.exp(-0.5 * (offsets / params.sigma) ** 2)
    for d, w in zip(dirs, weights):
        hit = cast_ray(bvh, mesh, fixation.mean_origin, d)
        if hit is not None:
            out[hit.face] += w
    return out


def build_saliency_map(
    mesh: TriMesh,
    sessions: list[list[GazeSample]],
    params: GazeParams | None = None,
    bvh: Bvh | None = None,
) -> tuple[SaliencyMap, SaliencyMap]:
    """Accumulate cone splats over all fixations of all sessions.

    Returns (raw_density, distribution) where the distribution view sums to 1.
    Partial sums are merged in session order, so the result is reproducible and
    independent of any internal parallelism.
    """
    from .bvh import build_bvh

    params = params or GazeParams()
    if not sessions:
        raise ValueError("need at least one gaze session")
    if bvh is None:
        bvh = build_bvh(mesh)

    density = np.zeros(mesh.n_faces)
    n_fix = 0
    for session in sessions:
        for fix in classify_fixations(session, params):
            locate_fixation(bvh, mesh, fix)
            if fix.hit_face is None:
                continue
            density += splat_fixation_cone(mesh, bvh, fix, params)
            n_fix += 1

    if density.sum() <= 0.0:
        raise NoFixationHitError("no fixations hit the mesh")
    meta = params.as_dict() | {"sessions": len(sessions), "fixations_hit": n_fix}
    raw = SaliencyMap(density, mesh.n_faces, kind="ground_truth", normalization="none", params=meta)
    return raw, raw.normalized()
