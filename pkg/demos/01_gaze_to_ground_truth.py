"""From a raw gaze log to a per-face ground-truth saliency map.

Synthesizes a plausible eye-tracking session over a wavy surface: three
dwell points connected by fast saccades, logged at 120 Hz in the standard
CSV format.  The pipeline then classifies fixations by velocity threshold,
casts each fixation's 1-degree Gaussian ray cone against the mesh through a
BVH, and accumulates the per-face density map.
"""
import numpy as np

from meshsal import (
    GazeParams,
    GazeSample,
    build_saliency_map,
    classify_fixations,
    read_gaze_log,
    save_saliency_map,
    write_gaze_log,
)
from meshsal.synth import grid_patch
from pathlib import Path

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

mesh = grid_patch(12, 12, height_fn=lambda x, y: 0.1 * np.sin(5 * x) * np.cos(4 * y))
print(f"surface: {mesh.n_faces} faces")

# -- synthesize a session ------------------------------------------------------
# The observer dwells ~0.33 s on each of three spots, with 3-sample saccades.
dwell_points = [(0.25, 0.25), (0.7, 0.6), (0.4, 0.8)]
samples = []
t = 0.0
origin_height = 3.0
for i, (x, y) in enumerate(dwell_points):
    origin = np.array([x, y, origin_height])
    direction = np.array([0.0, 0.0, -1.0])
    for _ in range(40):
        samples.append(GazeSample(t, origin, direction.copy(), direction.copy()))
        t += 1 / 120.0
    if i + 1 < len(dwell_points):
        for k in range(3):  # fast reorientation, excluded by the velocity test
            d = np.array([np.sin(0.3 * (k + 1)), 0.1, -1.0])
            d /= np.linalg.norm(d)
            samples.append(GazeSample(t, origin, d, d.copy()))
            t += 1 / 120.0

log_path = OUT / "session.csv"
write_gaze_log(log_path, samples)
print(f"wrote {log_path} ({len(samples)} samples)")

# -- classify and splat -------------------------------------------------------
session = read_gaze_log(log_path)
params = GazeParams()  # 30 deg/s threshold, 100 ms minimum, 1 degree cone
fixations = classify_fixations(session, params)
print(f"fixations detected: {len(fixations)} "
      f"(durations: {[round(f.duration, 3) for f in fixations]})")

raw, dist = build_saliency_map(mesh, [session], params)
print(f"raw density total: {raw.total:.4f}; distribution sums to {dist.values.sum():.9f}")
top = np.argsort(dist.values)[-5:][::-1]
print("five most salient faces:", top.tolist())

map_path = OUT / "ground_truth.txt"
save_saliency_map(raw, map_path)
print(f"wrote {map_path}")
