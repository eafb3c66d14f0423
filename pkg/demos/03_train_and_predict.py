"""Train the saliency model on one mesh and evaluate the prediction.

A compressed version of the learnability study: a 200-face surface with two
salient regions, trained for 80 epochs (the full 300-epoch run pushes train
L1 below 0.01).  Prints the metric trajectory and writes the prediction next
to the ground truth for comparison.
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from overfit_fixture import overfit_gt, overfit_mesh, overfit_model_config

from meshsal import SaliencyModel, evaluate_pair, format_metrics_row, save_saliency_map
from meshsal.train import TrainConfig, TrainItem, train_loop

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

mesh = overfit_mesh()
gt = overfit_gt(mesh)
print(f"mesh: {mesh.n_faces} faces; ground-truth range "
      f"[{gt.values.min():.3f}, {gt.values.max():.3f}]")

model = SaliencyModel(overfit_model_config())
n_params = sum(p.size for p in model.params.values())
print(f"model parameters: {n_params}")

plan = model.sample_plan(mesh, seed=0)
from meshsal.subgraph import coverage_fraction
print(f"subgraph coverage of the mesh: {coverage_fraction(plan.subgraphs, mesh.n_faces):.0%}")

cfg = TrainConfig(epochs=80, seed=11, lr_step_epochs=60)
t0 = time.time()


def progress(record):
    if record.epoch % 10 == 0:
        print(f"  epoch {record.epoch:3d}  lr {record.lr:.1e}  "
              f"train L1 {record.train_l1:.4f}  CC {record.cc:.4f}")


result = train_loop([TrainItem(mesh, gt)] * 2, model, cfg, log_fn=progress)
print(f"trained in {time.time() - t0:.0f}s; best CC {result.best_cc:.4f} "
      f"at epoch {result.best_epoch}")

pred = model.predict(mesh, seed=cfg.eval_seed)
metrics = evaluate_pair(pred.values, gt.values)
print("final evaluation:", format_metrics_row(metrics))

save_saliency_map(gt, OUT / "train_gt.txt")
save_saliency_map(pred, OUT / "train_pred.txt")
print(f"wrote {OUT / 'train_gt.txt'} and {OUT / 'train_pred.txt'}")
