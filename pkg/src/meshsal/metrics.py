"""Saliency agreement metrics: CC, SIM, KLD and SE.

Conventions, applied consistently by :func:`evaluate_pair`:

* CC is Pearson correlation on the raw values (affine-invariant, so any
  normalization gives the same number).
* SIM and KLD operate on distribution-normalized maps (sum = 1).  KLD is
  computed in nats with the measured ground truth as p and the prediction as
  q, so missing ground-truth mass is what gets penalized.
* SE is mean squared error between max-normalized maps ([0, 1] scale).
"""
from __future__ import annotations

import warnings

import numpy as np

from .saliency import SaliencyMap

KLD_EPS = 1e-12


def _values(m) -> np.ndarray:
    if isinstance(m, SaliencyMap):
        return np.asarray(m.values, dtype=np.float64)
    return np.asarray(m, dtype=np.float64)


def _check_lengths(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")


def cc(a, b) -> float:
    """Pearson correlation coefficient in [-1, 1]."""
    x, y = _values(a), _values(b)
    _check_lengths(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise ValueError("constant map")
    return float(xc @ yc / np.sqrt(vx * vy))


def _as_distribution(x: np.ndarray, label: str) -> np.ndarray:
    total = x.sum()
    if total <= 0.0:
        raise ValueError(f"{label}: cannot normalize an all-zero map")
    if not np.isclose(total, 1.0, atol=1e-6):
        warnings.warn(f"{label} does not sum to 1; normalizing", RuntimeWarning, stacklevel=3)
        return x / total
    return x / total  # exact renormalization is harmless and keeps sums at 1


def sim(p, q) -> float:
    """Histogram intersection of two distributions: sum of elementwise minima."""
    x, y = _values(p), _values(q)
    _check_lengths(x, y)
    x = _as_distribution(x, "sim: first argument")
    y = _as_distribution(y, "sim: second argument")
    return float(np.minimum(x, y).sum())


def kld(p, q) -> float:
    """Kullback-Leibler divergence KL(p || q) in nats, with 0*log(0) = 0."""
    x, y = _values(p), _values(q)
    _check_lengths(x, y)
    x = _as_distribution(x, "kld: first argument")
    y = _as_distribution(y, "kld: second argument")
    pos = x > 0.0
    return float(np.sum(x[pos] * np.log(x[pos] / (y[pos] + KLD_EPS))))


def se(pred, gt) -> float:
    """Mean squared error; inputs are expected on a common [0, 1] max scale."""
    x, y = _values(pred), _values(gt)
    _check_lengths(x, y)
    d = x - y
    return float(np.mean(d * d))


def evaluate_pair(pred, gt) -> dict[str, float]:
    """All four metrics with each metric's expected normalization applied."""
    p = _values(pred)
    g = _values(gt)
    _check_lengths(p, g)
    p_sum = p / p.sum() if p.sum() > 0 else p
    g_sum = g / g.sum() if g.sum() > 0 else g
    p_max = p / p.max() if p.max() > 0 else p
    g_max = g / g.max() if g.max() > 0 else g
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            "cc": cc(p, g),
            "sim": sim(g_sum, p_sum),
            "kld": kld(g_sum, p_sum),
            "se": se(p_max, g_max),
        }


def format_metrics_row(m: dict[str, float]) -> str:
    """The eval report row: CC up, SIM up, KLD down, SE down."""
    # round-then-add-zero avoids "-0.0000" when epsilon noise makes a
    # mathematically nonnegative metric infinitesimally negative.
    vals = {k: round(float(v), 4) + 0.0 for k, v in m.items()}
    return "CC={cc:.4f} SIM={sim:.4f} KLD={kld:.4f} SE={se:.4f}".format(**vals)
