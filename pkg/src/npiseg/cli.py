"""Operator entry point: scene generation, training, evaluation, serving.

Every subcommand honors --seed; identical invocations produce identical
artifacts. Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core.rng import RngStream
from .interaction import SimConfig, aggregate_metrics, run_episode
from .model import ModelConfig, init_params
from .scenes import SceneSpec, generate_scene, read_scene, write_scene
from .training import (Predictor, TrainConfig, load_checkpoint, save_checkpoint,
                       save_loss_csv, train_run)

__all__ = ["main"]


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-scene-latent", action="store_true",
                   help="ablation: zero out the scene-level latent")
    p.add_argument("--no-object-latent", action="store_true",
                   help="ablation: replace object latents with prototype means")
    p.add_argument("--modulation", choices=["film", "concat", "add", "deterministic"],
                   default="film")
    p.add_argument("--mc-samples", type=int, default=10,
                   help="Monte Carlo samples per object latent at inference")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--no-prev-mask", action="store_true",
                   help="disable the previous-mask encoder channel")
    p.add_argument("--proto-combine", choices=["sum", "mean"], default="mean")


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        d=args.dim,
        n_z=args.mc_samples,
        use_scene_latent=not args.no_scene_latent,
        use_object_latent=not args.no_object_latent,
        modulation_mode=args.modulation,
        use_prev_mask=not args.no_prev_mask,
        proto_combine=args.proto_combine,
    )


def _load_scene_dir(path: str):
    files = sorted(Path(path).glob("*.npsc"))
    if not files:
        raise ValueError(f"no .npsc scenes under {path}")
    return [read_scene(p) for p in files]


def cmd_gen_scenes(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SceneSpec(num_points=args.points,
                     num_objects=(args.min_objects, args.max_objects))
    for i in range(args.count):
        scene = generate_scene(spec, args.seed + i)
        write_scene(scene, out / f"scene_{i:04d}.npsc")
    print(f"wrote {args.count} scenes to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                      seed=args.seed, train_scenes=args.train_scenes)
    model_cfg = _model_config(args)
    if args.scenes:
        scenes = _load_scene_dir(args.scenes)
    else:
        spec = SceneSpec()
        scenes = [generate_scene(spec, cfg.seed * 10 ** 6 + i)
                  for i in range(cfg.train_scenes)]
    params = init_params(model_cfg, seed=cfg.seed)
    start = time.time()
    ckpt = train_run(cfg, scenes, model_cfg, params, progress=not args.quiet)
    print(f"trained {cfg.epochs} epochs on {len(scenes)} scenes "
          f"in {time.time() - start:.0f}s")
    save_checkpoint(ckpt, args.checkpoint, include_optimizer=args.save_optimizer)
    print(f"checkpoint: {args.checkpoint}")
    if args.loss_csv:
        save_loss_csv(ckpt.meta["loss_history"], args.loss_csv)
        print(f"loss history: {args.loss_csv}")
    return 0


def evaluate_checkpoint(checkpoint_path: str, scenes, seed: int,
                        k_max: int = 20, n_z: int | None = None,
                        workers: int = 1):
    """Episode evaluation; results merge in scene order for determinism."""
    ckpt = load_checkpoint(checkpoint_path)
    config = ckpt.config
    if n_z is not None:
        config = ModelConfig.from_dict({**config.to_dict(), "n_z": n_z})
    predictor = Predictor(ckpt.params, config)
    sim = SimConfig(k_max=k_max)

    def one(item):
        i, scene = item
        return run_episode(predictor, scene, sim,
                           RngStream(seed).child(f"episode:{i}"))

    items = list(enumerate(scenes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            episodes = list(pool.map(one, items))
    else:
        episodes = [one(it) for it in items]
    return aggregate_metrics(episodes), episodes


def cmd_eval(args) -> int:
    scenes = _load_scene_dir(args.scenes)
    report, _ = evaluate_checkpoint(args.checkpoint, scenes, args.seed,
                                    k_max=args.k_max, n_z=args.mc_samples,
                                    workers=args.workers)
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        print(f"report: {args.report}", file=sys.stderr)
    return 0


def cmd_episode(args) -> int:
    scene = read_scene(args.scene)
    ckpt = load_checkpoint(args.checkpoint)
    predictor = Predictor(ckpt.params, ckpt.config)
    record = run_episode(predictor, scene, SimConfig(k_max=args.k_max),
                         RngStream(args.seed).child("episode:0"))
    print(f"scene {args.scene}: {scene.num_points} points, "
          f"{scene.num_objects} objects")
    for i, rnd in enumerate(record.rounds, start=1):
        added = ", ".join(f"(p{c.point_index}→o{c.object_id})"
                          for c in rnd.clicks_added)
        per_obj = " ".join(f"o{m}={v:.3f}" for m, v in rnd.per_object_iou.items())
        print(f"round {i:2d}: mean IoU {rnd.mean_iou:.3f}  [{per_obj}]  "
              f"uncertainty {rnd.mean_uncertainty:.5f}  clicks {added}")
    print(f"converged: {record.converged}  "
          f"clicks/object: {record.clicks_per_object}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_path=args.checkpoint, scenes_dir=args.scenes,
                     seed=args.seed, float32=args.float32)
    host, _, port = args.listen.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return 0


def cmd_grad_check(args) -> int:
    from .verify import run_gradient_verification

    start = time.time()
    err = run_gradient_verification(samples_per_tensor=args.samples,
                                    seed=args.seed)
    elapsed = time.time() - start
    ok = err < 1e-4
    print(f"max relative gradient error: {err:.3e} "
          f"({'PASS' if ok else 'FAIL'}, threshold 1e-4, {elapsed:.1f}s)")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npiseg",
        description="interactive point-cloud segmentation, desk scale")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="write synthetic NPSC1 scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--points", type=int, default=1024)
    p.add_argument("--min-objects", type=int, default=2)
    p.add_argument("--max-objects", type=int, default=4)
    _add_seed(p)
    p.set_defaults(fn=cmd_gen_scenes)

    p = sub.add_parser("train", help="train a model, write a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", help="NPSC1 directory (default: generated)")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--train-scenes", type=int, default=200)
    p.add_argument("--loss-csv")
    p.add_argument("--save-optimizer", action="store_true")
    p.add_argument("--quiet", action="store_true")
    _add_seed(p)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run episodes over a scene directory")
    p.add_argument("--scenes", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_seed(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("episode", help="replay one scene verbosely")
    p.add_argument("--scene", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k-max", type=int, default=20)
    _add_seed(p)
    p.set_defaults(fn=cmd_episode)

    p = sub.add_parser("serve", help="start the interactive service")
    p.add_argument("--checkpoint", default=None,
                   help="model checkpoint (default: $NPISEG_CHECKPOINT)")
    p.add_argument("--scenes", help="NPSC1 directory to serve")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.add_argument("--float32", action="store_true",
                   help="cast parameters to float32 for serving")
    _add_seed(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("grad-check", help="verify gradients of the full loss")
    p.add_argument("--samples", type=int, default=None,
                   help="coordinates per tensor (default: all)")
    _add_seed(p)
    p.set_defaults(fn=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
