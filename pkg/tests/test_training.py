"""Loss assembly, the training loop, and checkpoint round trips."""

import json

import numpy as np
import pytest

from npiseg.core import RngStream, Tensor
from npiseg.interaction import SimConfig
from npiseg.model import ModelConfig, forward_infer, init_params
from npiseg.scenes import SceneSpec, generate_scene
from npiseg.training import (Checkpoint, TrainConfig, assemble_loss,
                             load_checkpoint, save_checkpoint, save_loss_csv,
                             train_run)

from conftest import center_clicks, fresh_rng, tiny_config


def small_setup(seed=0, n_scenes=4):
    mcfg = tiny_config()
    scenes = [generate_scene(SceneSpec(num_points=96, num_objects=(2, 2)), s)
              for s in range(n_scenes)]
    params = init_params(mcfg, seed=seed)
    return mcfg, scenes, params


# -- assemble_loss -----------------------------------------------------------------

def test_assemble_loss_paper_coefficients():
    cfg = TrainConfig()
    comps = {"ce": 0.4, "dice": 0.2, "kl_scene": 0.1, "kl_objects_sum": 0.3}
    assert assemble_loss(comps, cfg) == pytest.approx(0.802, abs=1e-12)


def test_assemble_loss_zero_kl_weight():
    cfg = TrainConfig(lambda_kl=0.0)
    comps = {"ce": 1.0, "dice": 2.0, "kl_scene": 99.0, "kl_objects_sum": 99.0}
    assert assemble_loss(comps, cfg) == pytest.approx(1.0 + 2.0 * 2.0)


def test_assemble_loss_all_zero():
    comps = {"ce": 0.0, "dice": 0.0, "kl_scene": 0.0, "kl_objects_sum": 0.0}
    assert assemble_loss(comps, TrainConfig()) == 0.0


def test_assemble_loss_rejects_negative_kl():
    comps = {"ce": 0.1, "dice": 0.1, "kl_scene": -0.5, "kl_objects_sum": 0.0}
    with pytest.raises(ValueError):
        assemble_loss(comps, TrainConfig())


def test_assemble_loss_linear_in_each_component():
    cfg = TrainConfig()
    base = {"ce": 0.3, "dice": 0.5, "kl_scene": 0.2, "kl_objects_sum": 0.7}
    f0 = assemble_loss(base, cfg)
    weights = {"ce": cfg.ce_weight, "dice": cfg.dice_weight,
               "kl_scene": cfg.lambda_kl, "kl_objects_sum": cfg.lambda_kl}
    for key, w in weights.items():
        bumped = dict(base)
        bumped[key] += 1.0
        assert assemble_loss(bumped, cfg) - f0 == pytest.approx(w, abs=1e-12)


def test_assemble_loss_accepts_tensors():
    comps = {k: Tensor(np.asarray(v)) for k, v in
             [("ce", 0.4), ("dice", 0.2), ("kl_scene", 0.1),
              ("kl_objects_sum", 0.3)]}
    out = assemble_loss(comps, TrainConfig())
    assert float(out.data) == pytest.approx(0.802)


# -- train_run ----------------------------------------------------------------------

def test_zero_lr_leaves_parameters_unchanged():
    mcfg, scenes, params = small_setup()
    before = params.state_dict()
    train_run(TrainConfig(epochs=1, lr=0.0, batch_size=2, seed=1),
              scenes[:2], mcfg, params, sim=SimConfig(n_iter=0))
    after = params.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_seed_deterministic():
    def run():
        mcfg, scenes, params = small_setup(seed=2)
        ckpt = train_run(TrainConfig(epochs=2, batch_size=2, seed=2),
                         scenes, mcfg, params, sim=SimConfig(n_iter=1))
        return ckpt

    a, b = run(), run()
    assert a.meta["loss_history"] == b.meta["loss_history"]
    sa, sb = a.params.state_dict(), b.params.state_dict()
    assert all(np.array_equal(sa[k], sb[k]) for k in sa)


def test_training_reduces_loss():
    mcfg, scenes, params = small_setup(n_scenes=8)
    ckpt = train_run(TrainConfig(epochs=6, batch_size=4, seed=3),
                     scenes, mcfg, params, sim=SimConfig(n_iter=1))
    history = ckpt.meta["loss_history"]
    assert history[-1]["mean_loss"] < history[0]["mean_loss"]


def test_empty_scene_list_rejected():
    mcfg, _, params = small_setup()
    with pytest.raises(ValueError):
        train_run(TrainConfig(), [], mcfg, params)


# -- checkpoints ----------------------------------------------------------------------

def test_checkpoint_round_trip_preserves_forward(tmp_path):
    mcfg, scenes, params = small_setup()
    ckpt = train_run(TrainConfig(epochs=1, batch_size=2, seed=4),
                     scenes[:2], mcfg, params, sim=SimConfig(n_iter=0))
    path = tmp_path / "model.json"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)

    scene = scenes[0]
    clicks = center_clicks(scene)
    a = forward_infer(scene, clicks, None, params, mcfg, fresh_rng(9))
    b = forward_infer(scene, clicks, None, back.params, back.config, fresh_rng(9))
    assert np.array_equal(a.logits, b.logits)
    assert np.array_equal(a.mask, b.mask)
    assert np.array_equal(a.uncertainty, b.uncertainty)


def test_checkpoint_optimizer_round_trip(tmp_path):
    mcfg, scenes, params = small_setup()
    ckpt = train_run(TrainConfig(epochs=1, batch_size=2, seed=5),
                     scenes[:2], mcfg, params, sim=SimConfig(n_iter=0))
    path = tmp_path / "model.json"
    save_checkpoint(ckpt, path, include_optimizer=True)
    back = load_checkpoint(path)
    assert back.optimizer is not None
    assert back.optimizer.step == ckpt.optimizer.step
    for name in ckpt.optimizer.m:
        assert np.array_equal(back.optimizer.m[name], ckpt.optimizer.m[name])


def test_truncated_checkpoint_rejected(tmp_path):
    mcfg, scenes, params = small_setup()
    ckpt = Checkpoint(mcfg, params)
    path = tmp_path / "model.json"
    save_checkpoint(ckpt, path)
    data = path.read_text()
    path.write_text(data[:len(data) // 2])
    with pytest.raises(json.JSONDecodeError):
        load_checkpoint(path)


def test_hand_edited_shape_names_the_parameter(tmp_path):
    mcfg, scenes, params = small_setup()
    path = tmp_path / "model.json"
    save_checkpoint(Checkpoint(mcfg, params), path)
    doc = json.loads(path.read_text())
    doc["params"]["enc.l0.b"]["shape"] = [3]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="enc.l0.b"):
        load_checkpoint(path)


def test_missing_parameter_rejected(tmp_path):
    mcfg, scenes, params = small_setup()
    path = tmp_path / "model.json"
    save_checkpoint(Checkpoint(mcfg, params), path)
    doc = json.loads(path.read_text())
    del doc["params"]["temp.raw"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="temp.raw"):
        load_checkpoint(path)


def test_version_mismatch_rejected(tmp_path):
    mcfg, scenes, params = small_setup()
    path = tmp_path / "model.json"
    save_checkpoint(Checkpoint(mcfg, params), path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_loss_csv_format(tmp_path):
    history = [{"epoch": 0, "mean_loss": 1.5, "mean_ce": 1.0,
                "mean_dice": 0.2, "mean_kl": 0.3}]
    path = tmp_path / "loss.csv"
    save_loss_csv(history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,mean_loss,mean_ce,mean_dice,mean_kl"
    assert lines[1].startswith("0,1.5,")
