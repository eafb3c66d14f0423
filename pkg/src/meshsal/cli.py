"""Command-line pipeline driver.

Subcommands: gen-gt, features, train, predict, eval, simplify, flops, ablate.
Every command takes ``--seed`` and is bit-reproducible under it; each run
writes a ``<output>.manifest.json`` (config hash, seed, versions) next to its
primary output.  Exit codes: 0 success, 1 pipeline error (with a
machine-readable ``error: {...}`` line on stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import load_config, write_manifest
from .errors import MeshSalError
from .gaze import GazeParams, build_saliency_map, read_gaze_log
from .geometry import feature_layout, geo_feature_matrix, save_feature_matrix
from .mesh import load_mesh, save_mesh
from .metrics import evaluate_pair, format_metrics_row
from .model import (
    ABLATION_TOGGLES,
    ModelConfig,
    SaliencyModel,
    apply_ablation,
    measure_flops,
)
from .saliency import load_saliency_map, save_saliency_map
from .simplify import simplify_to
from .synth import icosphere
from .texture import EncoderConfig, encode_texture, pooled_face_features
from .train import TrainConfig, TrainItem, load_checkpoint, save_checkpoint, train_loop


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed; reruns are byte-identical")
    p.add_argument(
        "--threads", type=int, default=0,
        help="worker cap, 0 = all cores; the numpy backend runs a single "
        "deterministic worker either way, so results never depend on this",
    )
    p.add_argument("--config", type=str, default=None, help="INI config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshsal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"meshsal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-gt", help="gaze log(s) -> ground-truth saliency map")
    p.add_argument("--mesh", required=True)
    p.add_argument("--log", action="append", required=True, help="gaze CSV; repeat per session")
    p.add_argument("--out", required=True)
    p.add_argument("--normalize", choices=["none", "sum"], default="none")
    p.add_argument("--velocity-threshold", type=float, default=None, help="deg/s")
    p.add_argument("--min-duration", type=float, default=None, help="seconds")
    p.add_argument("--aperture-deg", type=float, default=None)
    p.add_argument("--sigma-deg", type=float, default=None)
    p.add_argument("--rays", type=int, default=None, help="rays per fixation cone")
    _add_common(p)

    p = sub.add_parser("features", help="dump per-face geometry (and texture) features")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-spatial", action="store_true")
    p.add_argument("--no-curve", action="store_true")
    p.add_argument("--no-shape", action="store_true")
    p.add_argument("--texture-out", default=None, help="also dump pooled texture features")
    p.add_argument("--encoder", choices=["identity", "conv"], default="identity")
    p.add_argument("--encoder-dim", type=int, default=8)
    p.add_argument("--grid-density", type=int, default=8)
    p.add_argument("--pool", choices=["mean", "max"], default="mean")
    _add_common(p)

    p = sub.add_parser("train", help="train a model on mesh/ground-truth pairs")
    p.add_argument("--mesh", action="append", required=True)
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--val-mesh", action="append", default=None)
    p.add_argument("--val-gt", action="append", default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lr-step-epochs", type=int, default=None)
    p.add_argument("--mode", choices=["geometry", "color", "texture"], default=None)
    p.add_argument("--centers", type=int, default=None, help="subgraphs per mesh (L)")
    p.add_argument("--subgraph-len", type=int, default=None, help="faces per subgraph (M)")
    p.add_argument("--repeat", type=int, default=1,
                   help="times each item appears per epoch (walks resample per appearance)")
    _add_common(p)

    p = sub.add_parser("predict", help="predict a saliency map with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="compare predicted vs ground-truth maps")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    _add_common(p)

    p = sub.add_parser("simplify", help="saliency-guided quadric simplification")
    p.add_argument("--target-faces", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="saliency cost weight; 0 = plain quadric collapse")
    p.add_argument("--saliency", default=None, help="saliency map file")
    p.add_argument("input_obj")
    p.add_argument("output_obj")
    _add_common(p)

    p = sub.add_parser("flops", help="forward-pass FLOPs over a grid of L and M")
    p.add_argument("--L", default="64,128,256", help="comma-separated subgraph counts")
    p.add_argument("--M", default="16,32,64", help="comma-separated subgraph lengths")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    _add_common(p)

    p = sub.add_parser("ablate", help="train/eval with one component removed")
    p.add_argument("--mesh", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--off", choices=list(ABLATION_TOGGLES), default="none")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--out", default=None, help="append a CSV row to this file")
    _add_common(p)

    return parser


# -- handlers -------------------------------------------------------------------


def _gaze_params(args, cfg: GazeParams) -> GazeParams:
    if args.velocity_threshold is not None:
        cfg.velocity_threshold_deg = args.velocity_threshold
    if args.min_duration is not None:
        cfg.min_duration_s = args.min_duration
    if args.aperture_deg is not None:
        cfg.aperture_deg = args.aperture_deg
    if args.sigma_deg is not None:
        cfg.sigma_deg = args.sigma_deg
    if args.rays is not None:
        cfg.ray_count = args.rays
    return cfg


def cmd_gen_gt(args) -> int:
    params = _gaze_params(args, load_config(args.config)["gaze"])
    mesh = load_mesh(args.mesh)
    sessions = [read_gaze_log(p) for p in args.log]
    raw, dist = build_saliency_map(mesh, sessions, params)
    out_map = dist if args.normalize == "sum" else raw
    save_saliency_map(out_map, args.out)
    write_manifest(args.out, "gen-gt", vars(args), args.seed, params.as_dict())
    print(f"wrote {args.out}: {mesh.n_faces} faces, total density {raw.total:.6g}")
    return 0


def cmd_features(args) -> int:
    mesh = load_mesh(args.mesh)
    use_spatial, use_curve, use_shape = (
        not args.no_spatial, not args.no_curve, not args.no_shape
    )
    matrix = geo_feature_matrix(mesh, use_spatial, use_curve, use_shape)
    layout = feature_layout(use_spatial, use_curve, use_shape)
    save_feature_matrix(args.out, matrix, layout)
    payload = {"layout": layout}
    if args.texture_out:
        if mesh.texture is None or mesh.uvs is None:
            raise MeshSalError("texture feature dump requires a textured mesh with UVs")
        enc = EncoderConfig(mode=args.encoder, dim=args.encoder_dim, seed=args.seed)
        latent = encode_texture(mesh.texture, enc)
        tex = pooled_face_features(mesh, latent, args.grid_density, args.pool)
        save_feature_matrix(
            args.texture_out, tex, [f"tex_{i}" for i in range(tex.shape[1])]
        )
        payload["encoder"] = enc.as_dict()
        write_manifest(args.texture_out, "features", vars(args), args.seed, payload)
    write_manifest(args.out, "features", vars(args), args.seed, payload)
    print(f"wrote {args.out}: {matrix.shape[0]} faces x {matrix.shape[1]} features")
    return 0


def _load_items(mesh_paths, gt_paths) -> list[TrainItem]:
    if len(mesh_paths) != len(gt_paths):
        raise MeshSalError("--mesh and --gt must be given the same number of times")
    items = []
    for mp, gp in zip(mesh_paths, gt_paths):
        mesh = load_mesh(mp)
        gt = load_saliency_map(gp)
        if gt.mesh_face_count != mesh.n_faces:
            raise MeshSalError(f"{gp}: face count {gt.mesh_face_count} != mesh {mesh.n_faces}")
        items.append(TrainItem(mesh, gt))
    return items


def _model_config(args, cfg: ModelConfig) -> ModelConfig:
    if getattr(args, "mode", None):
        cfg.input_mode = args.mode
    if getattr(args, "centers", None):
        cfg.n_centers = args.centers
    if getattr(args, "subgraph_len", None):
        cfg.subgraph_len = args.subgraph_len
    cfg.param_seed = args.seed
    return cfg


def _train_config(args, cfg: TrainConfig) -> TrainConfig:
    if getattr(args, "epochs", None):
        cfg.epochs = args.epochs
    if getattr(args, "lr", None):
        cfg.lr = args.lr
    if getattr(args, "lr_step_epochs", None):
        cfg.lr_step_epochs = args.lr_step_epochs
    cfg.seed = args.seed
    return cfg


def cmd_train(args) -> int:
    file_cfg = load_config(args.config)
    mcfg = _model_config(args, file_cfg["model"])
    tcfg = _train_config(args, file_cfg["train"])
    items = _load_items(args.mesh, args.gt)
    val_items = None
    if args.val_mesh:
        val_items = _load_items(args.val_mesh, args.val_gt or [])
    tex_channels = 3
    if mcfg.input_mode == "texture" and items[0].mesh.texture is not None:
        tex_channels = items[0].mesh.texture.channels
    model = SaliencyModel(mcfg, texture_channels=tex_channels)

    log_path = Path(str(args.out) + ".log.csv")
    rows = []
    result = train_loop(
        items * max(1, args.repeat), model, tcfg, val_items=val_items,
        log_fn=lambda r: rows.append(r),
    )
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_l1", "cc", "sim", "kld", "se"])
        for r in rows:
            writer.writerow(["%d" % r.epoch] + ["%.10g" % x for x in r.as_row()[1:]])

    save_checkpoint(
        args.out,
        model,
        epoch=result.best_epoch,
        extra={"best_cc": result.best_cc, "aborted": result.aborted},
        state=result.best_state,
    )
    payload = {"model": mcfg.as_dict(), "train": tcfg.as_dict()}
    write_manifest(args.out, "train", vars(args), args.seed, payload)
    last = rows[-1] if rows else None
    if result.aborted:
        print("training aborted on divergence; checkpoint holds the last good state")
        return 1
    print(
        f"wrote {args.out}: best epoch {result.best_epoch} cc {result.best_cc:.4f}"
        + (f", final l1 {last.train_l1:.4f}" if last else "")
    )
    return 0


def cmd_predict(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    mesh = load_mesh(args.mesh)
    pred = model.predict(mesh, seed=args.seed)
    save_saliency_map(pred, args.out)
    write_manifest(args.out, "predict", vars(args), args.seed, manifest["config"])
    print(f"wrote {args.out}: prediction over {mesh.n_faces} faces")
    return 0


def cmd_eval(args) -> int:
    pred = load_saliency_map(args.pred)
    gt = load_saliency_map(args.gt)
    metrics = evaluate_pair(pred.values, gt.values)
    print(format_metrics_row(metrics))
    return 0


def cmd_simplify(args) -> int:
    mesh = load_mesh(args.input_obj)
    smap = None
    if args.saliency:
        smap = load_saliency_map(args.saliency)
    result = simplify_to(mesh, args.target_faces, saliency=smap, lam=args.lam)
    save_mesh(result.mesh, args.output_obj)
    write_manifest(
        args.output_obj,
        "simplify",
        vars(args),
        args.seed,
        {"lambda": args.lam, "target_faces": args.target_faces},
    )
    print(
        f"wrote {args.output_obj}: {result.mesh.n_faces} faces "
        f"({'target reached' if result.reached_target else 'topological lock'})"
    )
    return 0


def cmd_flops(args) -> int:
    l_values = [int(x) for x in args.L.split(",") if x]
    m_values = [int(x) for x in args.M.split(",") if x]
    mesh = icosphere(3)  # 1280 faces, enough for the largest default L
    lines = ["L,M,flops"]
    for l_val in l_values:
        for m_val in m_values:
            cfg = ModelConfig(
                n_centers=l_val, subgraph_len=m_val, d_enc=32, d_tok=64,
                n_state=8, n_blocks=2, param_seed=args.seed,
            )
            model = SaliencyModel(cfg)
            flops = measure_flops(model, mesh, seed=args.seed)
            lines.append(f"{l_val},{m_val},{flops:.0f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        write_manifest(args.out, "flops", vars(args), args.seed, {"L": l_values, "M": m_values})
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_ablate(args) -> int:
    file_cfg = load_config(args.config)
    base = file_cfg["model"]
    base.param_seed = args.seed
    cfg = apply_ablation(base, args.off)
    tcfg = file_cfg["train"]
    tcfg.epochs = args.epochs
    tcfg.seed = args.seed
    items = _load_items([args.mesh], [args.gt])
    tex_channels = items[0].mesh.texture.channels if items[0].mesh.texture else 3
    model = SaliencyModel(cfg, texture_channels=tex_channels)
    result = train_loop(items * max(1, args.repeat), model, tcfg)
    last = result.history[-1]
    row = {"cc": last.cc, "sim": last.sim, "kld": last.kld, "se": last.se}
    print(f"off={args.off} " + format_metrics_row(row))
    if args.out:
        path = Path(args.out)
        new = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(["off", "cc", "sim", "kld", "se"])
            writer.writerow([args.off] + ["%.10g" % row[k] for k in ("cc", "sim", "kld", "se")])
        write_manifest(path, "ablate", vars(args), args.seed, cfg.as_dict())
    return 0


HANDLERS = {
    "gen-gt": cmd_gen_gt,
    "features": cmd_features,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "simplify": cmd_simplify,
    "flops": cmd_flops,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except (MeshSalError, ValueError, OSError) as exc:
        err = {"command": args.command, "type": type(exc).__name__, "message": str(exc)}
        print("error: " + json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
