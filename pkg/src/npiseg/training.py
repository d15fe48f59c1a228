"""Loss assembly, the training loop, and checkpoint persistence.

Desk defaults train 40 epochs over 200 synthetic scenes with gradient
accumulation over batches of 4 and a single Adam step per batch; the
learning rate drops by 10x at 5/6 of the schedule. The paper-scale
preset (600 epochs, batch 5) is documented in the README but out of
desk scope.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import (AdamState, ParamStore, RngStream, Tensor, adam_step,
                   evaluate_with_gradients)
from .interaction import SimConfig, simulate_training_clicks
from .model import ModelConfig, forward_infer, forward_train, init_params
from .scenes import LabeledScene

__all__ = ["TrainConfig", "Checkpoint", "assemble_loss", "train_run",
           "save_checkpoint", "load_checkpoint", "save_loss_csv", "Predictor"]

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 40
    lr: float = 5e-4
    lr_decay_factor: float = 0.1
    lr_decay_fraction: float = 5.0 / 6.0
    batch_size: int = 4
    lambda_kl: float = 0.005
    ce_weight: float = 1.0
    dice_weight: float = 2.0
    seed: int = 0
    train_scenes: int = 200
    eval_scenes: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lambda_kl < 0 or self.ce_weight < 0 or self.dice_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class Predictor:
    """Frozen (params, config) pair exposing the inference pass."""

    params: ParamStore
    config: ModelConfig

    def __call__(self, scene: LabeledScene, clicks, rng: RngStream,
                 prev_mask=None):
        return forward_infer(scene, clicks, prev_mask, self.params,
                             self.config, rng)


def _value(x) -> float:
    return float(x.data) if isinstance(x, Tensor) else float(x)


def assemble_loss(components: dict, cfg: TrainConfig):
    """ce*w_ce + dice*w_dice + lambda_kl*(kl_scene + kl_objects_sum)."""
    for key in ("kl_scene", "kl_objects_sum"):
        if _value(components[key]) < -1e-12:
            raise ValueError(f"negative KL component '{key}': "
                             f"{_value(components[key])} (upstream bug)")
    return (cfg.ce_weight * components["ce"]
            + cfg.dice_weight * components["dice"]
            + cfg.lambda_kl * (components["kl_scene"] + components["kl_objects_sum"]))


def train_run(cfg: TrainConfig, scenes: Sequence[LabeledScene],
              model_config: ModelConfig, params: ParamStore,
              sim: SimConfig | None = None,
              progress: bool = False) -> "Checkpoint":
    """Optimize `params` in place over the scene set; returns a checkpoint.

    Per scene: clicks are simulated against the current model (inference
    only, no gradients kept), the training pass produces loss components,
    gradients accumulate over the batch, then one Adam step. Deterministic
    for a fixed (config, scenes, seed).
    """
    if not scenes:
        raise ValueError("no training scenes")
    sim = sim or SimConfig()
    rng = RngStream(cfg.seed).child("train_run")
    state = AdamState(lr=cfg.lr)
    decay_epoch = int(cfg.epochs * cfg.lr_decay_fraction)
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        if epoch == decay_epoch and decay_epoch < cfg.epochs:
            state.lr = cfg.lr * cfg.lr_decay_factor
        order = rng.child(f"shuffle:{epoch}").generator.permutation(len(scenes))
        sums = {"loss": 0.0, "ce": 0.0, "dice": 0.0, "kl": 0.0}
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            losses = []
            for i in batch:
                scene = scenes[int(i)]
                srng = rng.child(f"epoch:{epoch}:scene:{int(i)}")

                sim_state = {"mask": None}

                def model_cb(clicks, prev, _scene=scene, _rng=srng,
                             _st=sim_state):
                    mask = None if prev is None else prev
                    bundle = forward_infer(_scene, clicks, mask, params,
                                           model_config,
                                           _rng.child(f"sim:{len(clicks)}"))
                    _st["mask"] = bundle.mask
                    return bundle.mask

                clicks = simulate_training_clicks(scene, model_cb, sim,
                                                  srng.child("clicks"))
                comps = forward_train(scene, clicks, sim_state["mask"],
                                      scene.labels, params, model_config,
                                      srng.child("fwd"))
                loss = assemble_loss(comps, cfg)
                if not np.isfinite(loss.data):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch}, scene "
                        f"'{scene.scene_id}'")
                losses.append(loss)
                sums["loss"] += float(loss.data)
                sums["ce"] += _value(comps["ce"])
                sums["dice"] += _value(comps["dice"])
                sums["kl"] += _value(comps["kl_scene"]) + _value(comps["kl_objects_sum"])
            batch_loss = losses[0]
            for extra in losses[1:]:
                batch_loss = batch_loss + extra
            batch_loss = batch_loss * (1.0 / len(losses))
            evaluate_with_gradients(batch_loss, params)
            adam_step(params, state)
        n = len(scenes)
        history.append({"epoch": epoch, "mean_loss": sums["loss"] / n,
                        "mean_ce": sums["ce"] / n, "mean_dice": sums["dice"] / n,
                        "mean_kl": sums["kl"] / n})
        if progress:
            print(f"epoch {epoch:3d}  loss {history[-1]['mean_loss']:.4f}  "
                  f"ce {history[-1]['mean_ce']:.4f}  "
                  f"dice {history[-1]['mean_dice']:.4f}  "
                  f"kl {history[-1]['mean_kl']:.4f}", flush=True)

    meta = {"epochs": cfg.epochs, "loss_history": history,
            "train_config": asdict(cfg)}
    return Checkpoint(model_config, params, optimizer=state, meta=meta)


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ParamStore
    optimizer: AdamState | None = None
    meta: dict = field(default_factory=dict)


def save_loss_csv(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,mean_loss,mean_ce,mean_dice,mean_kl\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['mean_loss']!r},{row['mean_ce']!r},"
                     f"{row['mean_dice']!r},{row['mean_kl']!r}\n")


def save_checkpoint(ckpt: Checkpoint, path, include_optimizer: bool = False) -> None:
    """JSON document; float values round-trip exactly (repr serialization)."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": ckpt.config.to_dict(),
        "params": {name: {"shape": list(np.asarray(t).shape),
                          "data": np.asarray(t).reshape(-1).tolist()}
                   for name, t in ckpt.params.state_dict().items()},
        "optimizer": None,
        "meta": ckpt.meta,
    }
    if include_optimizer and ckpt.optimizer is not None:
        opt = ckpt.optimizer
        doc["optimizer"] = {
            "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
            "eps": opt.eps, "step": opt.step,
            "m": {k: v.reshape(-1).tolist() for k, v in opt.m.items()},
            "v": {k: v.reshape(-1).tolist() for k, v in opt.v.items()},
        }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)


def _no_duplicate_keys(pairs):
    keys = [k for k, _ in pairs]
    if len(keys) != len(set(keys)):
        dup = sorted({k for k in keys if keys.count(k) > 1})
        raise ValueError(f"duplicate keys in checkpoint: {dup}")
    return dict(pairs)


def load_checkpoint(path) -> Checkpoint:
    """Parse and validate a checkpoint against its own config."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh, object_pairs_hook=_no_duplicate_keys)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {doc.get('version')}")
    config = ModelConfig.from_dict(doc["config"])

    expected = init_params(config, seed=0)
    stored = doc["params"]
    missing = sorted(set(expected.names()) - set(stored))
    extra = sorted(set(stored) - set(expected.names()))
    if missing or extra:
        raise ValueError(f"checkpoint parameter names do not match config "
                         f"(missing: {missing}, unexpected: {extra})")
    params = ParamStore(seed=doc["meta"].get("train_config", {}).get("seed", 0))
    for name in expected.names():
        entry = stored[name]
        shape = tuple(entry["shape"])
        want = expected[name].data.shape
        if shape != want:
            raise ValueError(f"shape mismatch for parameter '{name}': "
                             f"checkpoint has {shape}, config implies {want}")
        data = np.array(entry["data"], dtype=np.float64).reshape(shape)
        params.add(name, data)

    optimizer = None
    if doc.get("optimizer"):
        o = doc["optimizer"]
        optimizer = AdamState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"],
                              eps=o["eps"], step=o["step"])
        for name in o["m"]:
            shape = params[name].data.shape
            optimizer.m[name] = np.array(o["m"][name]).reshape(shape)
            optimizer.v[name] = np.array(o["v"][name]).reshape(shape)
    return Checkpoint(config, params, optimizer, doc.get("meta", {}))
