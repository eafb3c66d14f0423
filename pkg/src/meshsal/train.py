"""Supervised training: L1 objective, AdamW, step-decayed learning rate.

The optimizer is Adam with decoupled weight decay; the learning rate starts at
1e-3 and is cut by 10x every 50 epochs, for 150 epochs by default.  Targets
are the raw ground-truth densities max-normalized to [0, 1], matching the
head's nonnegative output range; distribution normalization is applied only
inside the evaluation metrics.

Random-walk subgraphs are resampled every epoch during training (a free
augmentation); evaluation always uses one frozen plan seed so metric curves
are comparable across epochs and runs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import MeshFormatError, NumericError
from .mesh import TriMesh
from .metrics import evaluate_pair
from .model import ModelConfig, SaliencyModel
from .saliency import SaliencyMap


@dataclass
class TrainConfig:
    lr: float = 1e-3
    lr_decay: float = 0.1
    lr_step_epochs: int = 50
    epochs: int = 150
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_seed: int = 12345  # frozen sampling plan for evaluation
    resample_walks: bool = True

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainItem:
    mesh: TriMesh
    gt: SaliencyMap

    def target(self) -> np.ndarray:
        """Training target: raw density scaled into [0, 1] by its maximum."""
        peak = self.gt.values.max()
        if peak <= 0.0:
            raise ValueError("ground truth map is all zero")
        return self.gt.values / peak


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Step schedule: lr * decay^(epoch // step)."""
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_step_epochs)


def loss_l1(pred, gt) -> float:
    """Mean absolute difference between two per-face maps."""
    p = pred.values if isinstance(pred, SaliencyMap) else np.asarray(pred, dtype=np.float64)
    g = gt.values if isinstance(gt, SaliencyMap) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    return float(np.mean(np.abs(p - g)))


def l1_loss_tensor(pred: Tensor, target: np.ndarray) -> Tensor:
    """Differentiable L1; |x| uses sign subgradient (0 at the kink)."""
    return ad.absolute(pred - Tensor(target)).mean()


class AdamW:
    """Adam with decoupled weight decay; zero gradients leave parameters
    untouched except for the weight-decay shrinkage."""

    def __init__(self, params: dict[str, Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, lr: float) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
            p.data = p.data - lr * (update + cfg.weight_decay * p.data)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_l1: float
    cc: float
    sim: float
    kld: float
    se: float

    def as_row(self) -> list:
        return [self.epoch, self.lr, self.train_l1, self.cc, self.sim, self.kld, self.se]


@dataclass
class TrainResult:
    model: SaliencyModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_cc: float = -np.inf
    best_state: dict[str, np.ndarray] | None = None
    aborted: bool = False


def _evaluate(model: SaliencyModel, items, inputs_cache, seed: int) -> dict[str, float]:
    """Metrics averaged over items, under the frozen evaluation plan seed.

    A degenerate constant prediction (e.g. every face clamped to zero early in
    training) scores cc = 0 for that item instead of aborting the run.
    """
    keys = ("cc", "sim", "kld", "se")
    acc = {k: 0.0 for k in keys}
    for i, item in enumerate(items):
        plan = model.sample_plan(item.mesh, seed)
        with ad.no_grad():
            pred = model.forward(inputs_cache[i], plan)
        try:
            m = evaluate_pair(pred.data, item.gt.values)
        except ValueError:
            m = {"cc": 0.0, "sim": 0.0, "kld": float("inf"), "se": 1.0}
        for k in keys:
            acc[k] += m[k]
    return {k: v / len(items) for k, v in acc.items()}


def train_loop(
    train_items: list[TrainItem],
    model: SaliencyModel,
    cfg: TrainConfig,
    val_items: list[TrainItem] | None = None,
    log_fn=None,
) -> TrainResult:
    """Run the full schedule; keep the best-by-CC state; abort on divergence.

    Validation defaults to the training items when no held-out split is given
    (the desk-scale overfit setting).
    """
    if not train_items:
        raise ValueError("need at least one training mesh")
    eval_items = val_items if val_items else train_items

    inputs = [model.prepare(it.mesh) for it in train_items]
    eval_inputs = (
        [model.prepare(it.mesh) for it in val_items] if val_items else inputs
    )
    targets = [it.target() for it in train_items]
    optimizer = AdamW(model.params, cfg)
    result = TrainResult(model=model)
    last_good: dict[str, np.ndarray] | None = None

    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        seq = np.random.SeedSequence([cfg.seed, 7, epoch])
        order_rng = np.random.default_rng(seq)
        order = order_rng.permutation(len(train_items))
        plan_seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(len(train_items))]

        epoch_loss = 0.0
        diverged = False
        for rank, item_idx in enumerate(order):
            item = train_items[item_idx]
            plan_seed = plan_seeds[rank] if cfg.resample_walks else cfg.eval_seed
            plan = model.sample_plan(item.mesh, plan_seed)
            model.zero_grad()
            try:
                pred = model.forward(inputs[item_idx], plan)
                loss = l1_loss_tensor(pred, targets[item_idx])
                if not np.isfinite(loss.data):
                    diverged = True
                    break
                loss.backward()
                optimizer.step(lr)
            except NumericError:
                diverged = True
                break
            epoch_loss += loss.item()

        if not diverged:
            try:
                metrics = _evaluate(model, eval_items, eval_inputs, cfg.eval_seed)
            except NumericError:
                diverged = True
        if diverged:
            result.aborted = True
            if last_good is not None:
                model.load_state_arrays(last_good)
            break

        train_l1 = epoch_loss / len(train_items)
        record = EpochRecord(epoch, lr, train_l1, **metrics)
        result.history.append(record)
        last_good = model.state_arrays()
        if metrics["cc"] > result.best_cc:
            result.best_cc = metrics["cc"]
            result.best_epoch = epoch
            result.best_state = last_good
        if log_fn is not None:
            log_fn(record)

    if result.best_state is None and last_good is not None:
        result.best_state = last_good
        result.best_epoch = len(result.history) - 1
    return result


# -- checkpoint container ------------------------------------------------------

_CKPT_MAGIC = b"MESHSAL-CKPT1\n"


def save_checkpoint(
    path: str | Path,
    model: SaliencyModel,
    epoch: int = 0,
    rng_state: dict | None = None,
    extra: dict | None = None,
    state: dict[str, np.ndarray] | None = None,
) -> None:
    """Versioned binary container: JSON manifest line, then named float64 blobs.

    The byte stream is a pure function of the content (no timestamps, sorted
    tensor names), so identical states produce identical files.
    """
    tensors = state if state is not None else model.state_arrays()
    names = sorted(tensors)
    manifest = {
        "version": 1,
        "config": model.config.as_dict(),
        "texture_channels": model.texture_channels,
        "epoch": epoch,
        "rng_state": rng_state,
        "extra": extra or {},
        "tensors": [
            {"name": n, "shape": list(tensors[n].shape), "dtype": "float64"} for n in names
        ],
    }
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8") + b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(tensors[n], dtype=np.float64).tobytes())


def load_checkpoint(path: str | Path) -> tuple[SaliencyModel, dict]:
    """Rebuild the model from a checkpoint; forward outputs reproduce exactly."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise MeshFormatError(f"{path}: not a checkpoint file")
        manifest = json.loads(fh.readline().decode("utf-8"))
        state: dict[str, np.ndarray] = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            n_bytes = int(np.prod(shape)) * 8 if shape else 8
            buf = fh.read(n_bytes)
            state[entry["name"]] = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
    model = SaliencyModel(
        ModelConfig.from_dict(manifest["config"]),
        texture_channels=manifest.get("texture_channels", 3),
    )
    model.load_state_arrays(state)
    return model, manifest
