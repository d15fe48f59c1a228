import numpy as np
import pytest

from npiseg.core import RngStream
from npiseg.model import Click, ClickSet, ModelConfig, init_params
from npiseg.scenes import SceneSpec, generate_scene

TINY_SPEC = SceneSpec(num_points=96, num_objects=(2, 2))


def tiny_config(**overrides) -> ModelConfig:
    defaults = dict(d=8, n_z=4, attn_context=24, knn_k=6)
    defaults.update(overrides)
    return ModelConfig(**defaults)


def center_clicks(scene, per_object: int = 1) -> ClickSet:
    """Deterministic clicks: the first `per_object` points of each object."""
    clicks = ClickSet()
    for m in range(1, scene.num_objects + 1):
        for idx in np.flatnonzero(scene.labels == m)[:per_object]:
            clicks.add(Click(int(idx), m))
    return clicks


@pytest.fixture
def tiny_scene():
    return generate_scene(TINY_SPEC, 0)


@pytest.fixture
def tiny_model():
    cfg = tiny_config()
    return cfg, init_params(cfg, seed=1)


def fresh_rng(seed=42) -> RngStream:
    return RngStream(seed).child("test")
