"""Per-face saliency maps and their on-disk text format.

A map stores one nonnegative scalar per face.  ``kind`` distinguishes measured
ground truth from model predictions; ``normalization`` records whether the
stored values are raw densities, a probability distribution (sum = 1), or
max-scaled to [0, 1].

File format (one header line, then one float per line, line k = face k)::

    # meshsal-saliency v=1 faces=<N> kind=<kind> normalization=<mode> params=<json>
    0.0123
    ...
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshFormatError

FORMAT_VERSION = 1


@dataclass
class SaliencyMap:
    """Nonnegative per-face scalar field."""

    values: np.ndarray
    mesh_face_count: int
    kind: str = "ground_truth"  # ground_truth | prediction
    normalization: str = "none"  # none | sum | max
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or len(self.values) != self.mesh_face_count:
            raise ValueError(
                f"saliency length {self.values.shape} != face count {self.mesh_face_count}"
            )
        if np.any(self.values < 0):
            raise ValueError("saliency values must be nonnegative")

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def normalized(self) -> "SaliencyMap":
        """Distribution view: values scaled to sum to 1."""
        total = self.total
        if total <= 0.0:
            raise ValueError("cannot normalize an all-zero saliency map")
        return SaliencyMap(
            self.values / total, self.mesh_face_count, self.kind, "sum", dict(self.params)
        )

    def max_normalized(self) -> "SaliencyMap":
        """Values scaled into [0, 1] by the maximum."""
        peak = float(self.values.max()) if len(self.values) else 0.0
        if peak <= 0.0:
            raise ValueError("cannot max-normalize an all-zero saliency map")
        return SaliencyMap(
            self.values / peak, self.mesh_face_count, self.kind, "max", dict(self.params)
        )


def save_saliency_map(smap: SaliencyMap, path: str | Path) -> None:
    header = (
        f"# meshsal-saliency v={FORMAT_VERSION} faces={smap.mesh_face_count} "
        f"kind={smap.kind} normalization={smap.normalization} "
        f"params={json.dumps(smap.params, sort_keys=True, separators=(',', ':'))}"
    )
    lines = [header]
    lines.extend("%.17g" % v for v in smap.values)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_saliency_map(path: str | Path) -> SaliencyMap:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# meshsal-saliency"):
        raise MeshFormatError(f"{path}: missing saliency header line")
    fields: dict[str, str] = {}
    for token in text[0][1:].strip().split(" ")[1:]:
        key, _, val = token.partition("=")
        fields[key] = val
    try:
        faces = int(fields["faces"])
        params = json.loads(fields.get("params", "{}"))
    except (KeyError, ValueError) as exc:
        raise MeshFormatError(f"{path}: bad saliency header: {exc}") from exc
    values = np.array([float(x) for x in text[1:] if x.strip()], dtype=np.float64)
    if len(values) != faces:
        raise MeshFormatError(f"{path}: header says {faces} faces, file has {len(values)} values")
    return SaliencyMap(
        values,
        faces,
        kind=fields.get("kind", "ground_truth"),
        normalization=fields.get("normalization", "none"),
        params=params,
    )
