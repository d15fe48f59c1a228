"""Hierarchical latent-variable segmentation model over click prototypes.

Pipeline: a small point encoder turns the scene into per-point features
and the clicked points into prototypes; prototype summaries condition a
scene-level Gaussian latent and per-object Gaussian latents; latent
samples modulate the prototypes (feature-wise scale/shift by default);
cosine similarity against the modulated prototypes yields per-object
logits, the argmax mask, and a per-point uncertainty map (variance of
the cosine response across latent samples, maxed over clicks and then
over objects).

Training mirrors the prior pathway with separately parameterized
posteriors conditioned on ground-truth groupings of the target points;
the loss couples cross-entropy + dice on temperature-scaled logits with
KL(posterior || prior) terms at both levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.spatial import cKDTree

from .core.ops import (attention_apply, cosine_matrix, cross_attention_apply,
                       cross_entropy_loss, dice_loss, gaussian_kl, init_attention,
                       init_mlp, mlp_apply, reparameterize, softmax)
from .core.params import Gaussian, ParamStore
from .core.rng import RngStream
from .core.tensor import Tensor, concat, narrow, softplus, stack, take_rows, tmax, tmean, tsum
from .scenes import LabeledScene

__all__ = [
    "Click", "ClickSet", "ModelConfig", "ClickPrototypes", "PrototypeSummary",
    "HierarchicalLatents", "ModulatedPrototypes", "PredictionBundle",
    "init_params", "encode_points", "summarize_prototypes", "scene_latent_prior",
    "object_latent_prior", "infer_posteriors", "modulate", "predict",
    "forward_infer", "forward_train", "temperature",
]

STDDEV_FLOOR = 1e-4
ABSENT_LOGIT = -2.0  # strictly below any cosine, so absent objects never win
MODULATION_MODES = ("film", "concat", "add", "deterministic")


@dataclass(frozen=True)
class Click:
    point_index: int
    object_id: int


class ClickSet:
    """Ordered clicks plus the per-object grouping derived from them."""

    def __init__(self, clicks=()):
        self.clicks: list[Click] = list(clicks)

    def __len__(self):
        return len(self.clicks)

    def __iter__(self):
        return iter(self.clicks)

    def add(self, click: Click) -> None:
        self.clicks.append(click)

    def pop(self) -> Click:
        return self.clicks.pop()

    def copy(self) -> "ClickSet":
        return ClickSet(self.clicks)

    def by_object(self, num_objects: int) -> list[list[Click]]:
        """Groups 0..num_objects in canonical order (point index ascending),
        so any within-object permutation of the input yields identical groups."""
        groups: list[list[Click]] = [[] for _ in range(num_objects + 1)]
        for c in self.clicks:
            groups[c.object_id].append(c)
        return [sorted(g, key=lambda c: c.point_index) for g in groups]

    def validate(self, scene: LabeledScene) -> None:
        for c in self.clicks:
            if not 0 <= c.point_index < scene.num_points:
                raise ValueError(f"click index {c.point_index} out of range")
            if not 0 <= c.object_id <= scene.num_objects:
                raise ValueError(f"click object {c.object_id} out of range")


@dataclass
class ModelConfig:
    d: int = 32
    alpha: float = 0.5                 # scene-vs-object blend in the object prior
    n_z: int = 10                      # Monte Carlo samples at inference
    temperature_init: float = 10.0     # learnable logit scale, softplus-parameterized
    use_scene_latent: bool = True
    use_object_latent: bool = True
    modulation_mode: str = "film"      # film | concat | add | deterministic
    use_prev_mask: bool = True     # previous-mask encoder channel
    bg_protos: int = 1                 # learned background prototypes on object 0
    knn_k: int = 16
    attn_context: int = 64             # scene tokens the click attention sees
    proto_combine: str = "mean"        # "sum" is the raw printed form; the mean
                                       # keeps the prior input in-distribution at
                                       # any click count
    activation: str = "relu"
    max_objects: int = 7               # prev-mask one-hot width is max_objects+1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_z < 1:
            raise ValueError("n_z must be >= 1")
        if self.temperature_init <= 0:
            raise ValueError("temperature must be positive")
        if self.modulation_mode not in MODULATION_MODES:
            raise ValueError(f"unknown modulation mode: {self.modulation_mode}")
        if self.proto_combine not in ("sum", "mean"):
            raise ValueError("proto_combine must be 'sum' or 'mean'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ClickPrototypes:
    """Per object: (count, d) prototype tensor, or None when it has none.

    Object 0 carries the learned background prototypes in front of any
    encoded background clicks, so a mask is defined before any click.
    """

    groups: list[Tensor | None]

    def present(self) -> list[int]:
        return [m for m, g in enumerate(self.groups) if g is not None]

    def count(self, m: int) -> int:
        g = self.groups[m]
        return 0 if g is None else g.shape[0]


@dataclass
class PrototypeSummary:
    object_means: list[Tensor | None]
    scene_mean: Tensor


@dataclass
class HierarchicalLatents:
    scene: Gaussian | None
    objects: list[Gaussian | None]
    scene_sample: Tensor
    object_samples: list[Tensor | None]  # per object: (n_z_eff, d)


@dataclass
class ModulatedPrototypes:
    groups: list[Tensor | None]  # per object: (count, n_z_eff, d)


@dataclass
class PredictionBundle:
    logits: np.ndarray                 # (M+1, N), absent rows at ABSENT_LOGIT
    mask: np.ndarray                   # (N,) int argmax, smallest-id tie-break
    uncertainty: np.ndarray            # (N,) max over objects
    per_object_uncertainty: np.ndarray  # (M+1, N)
    present: list[int]
    logits_t: Tensor = field(repr=False, default=None)


# -- parameters ---------------------------------------------------------------

SIGMA_INIT = 0.3


def _temper_gaussian_head(p: ParamStore, prefix: str, d: int) -> None:
    """Start distribution heads near N(0, SIGMA_INIT): tiny final weights,
    sigma bias at softplus^-1(SIGMA_INIT). Keeps initial KL terms small
    instead of pinning sigma to its floor with random means; the modest
    scale keeps the relative information gain of extra clicks visible in
    the learned prior spread."""
    p[f"{prefix}.l1.w"].data *= 0.01
    p[f"{prefix}.l1.b"].data[d:] = np.log(np.expm1(SIGMA_INIT))


def init_params(config: ModelConfig, seed: int) -> ParamStore:
    """Allocate every trainable tensor for the given configuration."""
    p = ParamStore(seed)
    d = config.d
    enc_in = 12 + (15 if config.use_prev_mask else 0)
    init_mlp(p, "enc", [enc_in, d, d, d])
    if config.use_prev_mask:
        init_mlp(p, "prev", [config.max_objects + 1, d, d, d, 15])
    init_attention(p, "clickattn", d)
    init_attention(p, "prior_scene.attn", d)
    init_mlp(p, "prior_scene.head", [d, d, 2 * d])
    init_mlp(p, "prior_obj.head", [d, d, 2 * d])
    init_attention(p, "post_scene.attn", d)
    init_mlp(p, "post_scene.head", [d, d, 2 * d])
    init_mlp(p, "post_obj.head", [d, d, 2 * d])
    for prefix in ("prior_scene.head", "prior_obj.head",
                   "post_scene.head", "post_obj.head"):
        _temper_gaussian_head(p, prefix, d)
    init_mlp(p, "mod.gamma", [d, d, d])
    # near-zero initial scale: modulated prototypes start as beta(z) and
    # the per-click scale path grows in as training needs it
    p["mod.gamma.l1.w"].data *= 0.01
    init_mlp(p, "mod.beta", [d, d, d])
    init_mlp(p, "mod.concat", [2 * d, d, d])
    if config.bg_protos > 0:
        p.add("bg_proto", RngStream(seed).child("bg_proto").normal((config.bg_protos, d)))
    p.add("temp.raw", np.log(np.expm1(config.temperature_init)))
    return p


def temperature(params: ParamStore) -> Tensor:
    return softplus(params["temp.raw"])


# -- encoder --------------------------------------------------------------------

def _encoder_input(scene: LabeledScene, k: int) -> np.ndarray:
    """[xyz, rgb, kNN-mean of both] per point; memoized on the scene."""
    cache = getattr(scene, "_enc_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(scene, "_enc_cache", cache)
    if k not in cache:
        base = scene.points.copy()
        kk = min(k + 1, scene.num_points)
        _, idx = cKDTree(scene.xyz).query(scene.xyz, k=kk)
        idx = np.atleast_2d(idx)
        neigh = base[idx[:, 1:]].mean(axis=1) if kk > 1 else base
        cache[k] = np.concatenate([base, neigh], axis=1)
    return cache[k]


def encode_points(scene: LabeledScene, clicks: ClickSet,
                  prev_mask: np.ndarray | None, params: ParamStore,
                  config: ModelConfig, rng: RngStream):
    """Per-point features plus attention-refined click prototypes."""
    clicks.validate(scene)
    dtype = params["temp.raw"].dtype  # float32 in serving mode
    x = Tensor(_encoder_input(scene, config.knn_k).astype(dtype, copy=False))
    if config.use_prev_mask:
        width = config.max_objects + 1
        onehot = np.zeros((scene.num_points, width), dtype=dtype)
        if prev_mask is not None:
            labels = np.asarray(prev_mask, dtype=np.intp)
            if labels.min() < 0 or labels.max() >= width:
                raise ValueError("prev_mask labels out of range")
            onehot[np.arange(scene.num_points), labels] = 1.0
        emb = mlp_apply(Tensor(onehot), params, "prev", 4, config.activation)
        x = concat([x, emb], axis=1)
    feats = mlp_apply(x, params, "enc", 3, config.activation)

    groups_cfg = clicks.by_object(scene.num_objects)
    flat = [c for group in groups_cfg for c in group]
    refined = None
    if flat:
        rows = take_rows(feats, np.array([c.point_index for c in flat]))
        n_ctx = min(config.attn_context, scene.num_points)
        ctx_idx = np.sort(rng.child("ctx").choice(scene.num_points, n_ctx))
        ctx = take_rows(feats, ctx_idx)
        refined = cross_attention_apply(rows, ctx, params, "clickattn")

    groups: list[Tensor | None] = []
    offset = 0
    for m, group in enumerate(groups_cfg):
        parts = []
        if m == 0 and config.bg_protos > 0:
            parts.append(params["bg_proto"])
        if group:
            parts.append(narrow(refined, 0, offset, offset + len(group)))
            offset += len(group)
        groups.append(concat(parts, axis=0) if len(parts) > 1 else
                      (parts[0] if parts else None))
    return feats, ClickPrototypes(groups)


# -- prototype summaries and latent distributions ----------------------------------

def summarize_prototypes(protos: ClickPrototypes) -> PrototypeSummary:
    """Object means plus their mean as the scene-level summary."""
    means = [None if g is None else tmean(g, axis=0) for g in protos.groups]
    present = [m for m in means if m is not None]
    if not present:
        raise ValueError("no prototypes anywhere: need at least one click "
                         "or a background prototype")
    scene_mean = tmean(stack(present), axis=0)
    return PrototypeSummary(means, scene_mean)


def _gaussian_head(vec: Tensor, params: ParamStore, prefix: str,
                   config: ModelConfig) -> Gaussian:
    d = config.d
    out = mlp_apply(vec.reshape(1, -1), params, prefix, 2, config.activation).reshape(-1)
    mu = narrow(out, 0, 0, d)
    sigma = softplus(narrow(out, 0, d, 2 * d)) + STDDEV_FLOOR
    return Gaussian(mu, sigma)


def scene_latent_prior(summary: PrototypeSummary, params: ParamStore,
                       config: ModelConfig, side: str = "prior") -> Gaussian:
    """Gaussian over the scene latent from [scene token; object tokens]."""
    tokens = stack([summary.scene_mean]
                   + [m for m in summary.object_means if m is not None])
    out = attention_apply(tokens, params, f"{side}_scene.attn")
    scene_tok = narrow(out, 0, 0, 1).reshape(-1)
    return _gaussian_head(scene_tok, params, f"{side}_scene.head", config)


def object_latent_prior(z_s_sample: Tensor, protos_m: Tensor, alpha: float,
                        params: ParamStore, config: ModelConfig,
                        side: str = "prior") -> Gaussian:
    """Gaussian over one object latent from the shared scene sample and
    that object's prototypes (raw sum by default, as printed)."""
    if protos_m is None or protos_m.shape[0] == 0:
        raise ValueError("object has no prototypes")
    if config.proto_combine == "sum":
        combined = tsum(protos_m, axis=0)
    else:
        combined = tmean(protos_m, axis=0)
    h = alpha * z_s_sample + (1.0 - alpha) * combined
    return _gaussian_head(h, params, f"{side}_obj.head", config)


def infer_posteriors(features: Tensor, labels: np.ndarray, params: ParamStore,
                     config: ModelConfig, eps_scene: np.ndarray):
    """Posterior Gaussians from ground-truth groupings of target features.

    Returns (q_scene, z_s_sample, q_objects). The scene sample is drawn
    via reparameterization with the supplied noise and is shared by every
    object posterior (and by the object priors during training).
    """
    labels = np.asarray(labels)
    num_objects = int(labels.max(initial=0))
    means = []
    for m in range(num_objects + 1):
        idx = np.flatnonzero(labels == m)
        if idx.size == 0:
            raise ValueError(f"object {m} has no ground-truth points")
        means.append(tmean(take_rows(features, idx), axis=0))
    scene_mean = tmean(stack(means), axis=0)
    tokens = stack([scene_mean] + means)
    out = attention_apply(tokens, params, "post_scene.attn")
    q_scene = _gaussian_head(narrow(out, 0, 0, 1).reshape(-1), params,
                             "post_scene.head", config)
    if config.use_scene_latent:
        z_s_sample = reparameterize(q_scene, eps_scene)
    else:
        z_s_sample = Tensor(np.zeros(config.d))
    q_objects = []
    for m in range(num_objects + 1):
        h = config.alpha * z_s_sample + (1.0 - config.alpha) * means[m]
        q_objects.append(_gaussian_head(h, params, "post_obj.head", config))
    return q_scene, z_s_sample, q_objects


# -- prototype modulation ------------------------------------------------------------

def _film(protos_m: Tensor, source: Tensor, params: ParamStore,
          config: ModelConfig) -> Tensor:
    """gamma(z) * x + beta(z) for every (click, sample) pair."""
    gamma = mlp_apply(source, params, "mod.gamma", 2, config.activation)
    beta = mlp_apply(source, params, "mod.beta", 2, config.activation)
    n, s = protos_m.shape[0], source.shape[0]
    x = protos_m.reshape((n, 1, config.d))
    return x * gamma.reshape((1, s, config.d)) + beta.reshape((1, s, config.d))


def modulate(protos: ClickPrototypes, latents: HierarchicalLatents, mode: str,
             params: ParamStore, config: ModelConfig) -> ModulatedPrototypes:
    """Blend latent samples into every click prototype."""
    if mode not in MODULATION_MODES:
        raise ValueError(f"unknown modulation mode: {mode}")
    d = config.d
    groups: list[Tensor | None] = []
    for m, protos_m in enumerate(protos.groups):
        if protos_m is None:
            groups.append(None)
            continue
        n = protos_m.shape[0]
        if mode == "deterministic":
            groups.append(_film(protos_m, tmean(protos_m, axis=0).reshape(1, d),
                                params, config))
            continue
        z = latents.object_samples[m]
        if z is None:
            raise ValueError(f"object {m} has prototypes but no latent sample")
        s = z.shape[0]
        if mode == "film":
            groups.append(_film(protos_m, z, params, config))
        elif mode == "add":
            groups.append(protos_m.reshape((n, 1, d)) + z.reshape((1, s, d)))
        else:  # concat
            rep = take_rows(protos_m, np.repeat(np.arange(n), s))
            til = take_rows(z, np.tile(np.arange(s), n))
            out = mlp_apply(concat([rep, til], axis=1), params, "mod.concat",
                            2, config.activation)
            groups.append(out.reshape((n, s, d)))
    return ModulatedPrototypes(groups)


# -- mask head --------------------------------------------------------------------

def predict(features: Tensor, modulated: ModulatedPrototypes,
            config: ModelConfig) -> PredictionBundle:
    """Cosine responses vs modulated prototypes: per object the logit is
    max over clicks of the sample-mean response; the uncertainty is max
    over clicks of the sample variance; the mask is the per-point argmax
    over present objects with smallest-id tie-break."""
    present = [m for m, g in enumerate(modulated.groups) if g is not None]
    if not present:
        raise ValueError("no prototypes to predict from")
    n_pts = features.shape[0]
    flat_groups = []
    for m in present:
        g = modulated.groups[m]
        flat_groups.append(g.reshape((g.shape[0] * g.shape[1], config.d)))
    sims = cosine_matrix(features, concat(flat_groups, axis=0))

    unc_rows: list[np.ndarray] = []
    offset = 0
    by_object: dict[int, Tensor] = {}
    for m in present:
        g = modulated.groups[m]
        n_click, n_s = g.shape[0], g.shape[1]
        block = narrow(sims, 1, offset, offset + n_click * n_s)
        offset += n_click * n_s
        cube = block.reshape((n_pts, n_click, n_s))
        mean_j = tmean(cube, axis=2)
        by_object[m] = tmax(mean_j, axis=1)
        dev = cube - tmean(cube, axis=2, keepdims=True)
        var = tmean(dev * dev, axis=2)
        unc_rows.append(var.data.max(axis=1))

    absent_row = np.full(n_pts, ABSENT_LOGIT, dtype=features.dtype)
    logit_rows = [by_object[m] if m in by_object else Tensor(absent_row)
                  for m in range(len(modulated.groups))]
    logits_t = stack(logit_rows)

    unc = np.zeros((len(modulated.groups), n_pts))
    for row, m in zip(unc_rows, present):
        unc[m] = row
    mask = np.argmax(logits_t.data, axis=0)
    return PredictionBundle(
        logits=logits_t.data,
        mask=mask.astype(np.int64),
        uncertainty=unc.max(axis=0),
        per_object_uncertainty=unc,
        present=present,
        logits_t=logits_t,
    )


# -- full passes --------------------------------------------------------------------

def _effective_samples(config: ModelConfig, training: bool) -> int:
    if config.modulation_mode == "deterministic" or not config.use_object_latent:
        return 1
    return 1 if training else config.n_z


def _sample_conditionals(z_rows: Tensor, protos_m: Tensor, alpha: float,
                         params: ParamStore, config: ModelConfig,
                         eps: np.ndarray, side: str = "prior") -> Tensor:
    """Per-sample object latents: row j of z_rows conditions sample j.

    Vectorized form of object_latent_prior over the scene samples; the
    returned matrix is (n_samples, d)."""
    d = config.d
    if config.proto_combine == "sum":
        combined = tsum(protos_m, axis=0)
    else:
        combined = tmean(protos_m, axis=0)
    h = alpha * z_rows + (1.0 - alpha) * combined.reshape(1, d)
    out = mlp_apply(h, params, f"{side}_obj.head", 2, config.activation)
    mu = narrow(out, 1, 0, d)
    sigma = softplus(narrow(out, 1, d, 2 * d)) + STDDEV_FLOOR
    return mu + sigma * Tensor(np.asarray(eps, dtype=mu.dtype))


def _antithetic_normal(rng: RngStream, n: int, d: int) -> np.ndarray:
    """n standard-normal rows as +/- pairs: same marginals, roughly half
    the Monte Carlo noise in the sample mean and variance estimates."""
    half = rng.normal(((n + 1) // 2, d))
    return np.concatenate([half, -half], axis=0)[:n]


def _prior_latents(protos: ClickPrototypes, summary: PrototypeSummary,
                   params: ParamStore, config: ModelConfig, rng: RngStream,
                   n_samples: int) -> HierarchicalLatents:
    """Hierarchical Monte Carlo: sample j draws its own scene latent and,
    conditioned on it, one object latent per object. Within a sample the
    scene draw is shared by every object (scene coherence), and the noise
    matrices are shared across objects so that relabeling objects only
    permutes the samples (mask equivariance)."""
    d = config.d
    if config.use_scene_latent:
        scene_dist = scene_latent_prior(summary, params, config)
        eps_s = _antithetic_normal(rng.child("z_s"), n_samples, d)
        z_s_rows = (scene_dist.mean.reshape(1, d)
                    + scene_dist.stddev.reshape(1, d)
                    * Tensor(eps_s.astype(scene_dist.mean.dtype)))
    else:
        scene_dist = None
        z_s_rows = Tensor(np.zeros((n_samples, d),
                                   dtype=params["temp.raw"].dtype))

    obj_dists: list[Gaussian | None] = [None] * len(protos.groups)
    samples: list[Tensor | None] = [None] * len(protos.groups)
    if config.modulation_mode != "deterministic":
        eps_o = _antithetic_normal(rng.child("z_o"), n_samples, d)
        for m in protos.present():
            if config.use_object_latent:
                obj_dists[m] = object_latent_prior(
                    narrow(z_s_rows, 0, 0, 1).reshape(-1), protos.groups[m],
                    config.alpha, params, config)
                samples[m] = _sample_conditionals(z_s_rows, protos.groups[m],
                                                  config.alpha, params, config,
                                                  eps_o)
            else:
                samples[m] = tmean(protos.groups[m], axis=0).reshape(1, d)
    z_s_first = narrow(z_s_rows, 0, 0, 1).reshape(-1)
    return HierarchicalLatents(scene_dist, obj_dists, z_s_first, samples)


def forward_infer(scene: LabeledScene, clicks: ClickSet,
                  prev_mask: np.ndarray | None, params: ParamStore,
                  config: ModelConfig, rng: RngStream) -> PredictionBundle:
    """Inference pass: encode, condition priors, sample, modulate, predict."""
    feats, protos = encode_points(scene, clicks, prev_mask, params, config, rng)
    summary = summarize_prototypes(protos)
    latents = _prior_latents(protos, summary, params, config, rng,
                             _effective_samples(config, training=False))
    modulated = modulate(protos, latents, config.modulation_mode, params, config)
    return predict(feats, modulated, config)


def forward_train(scene: LabeledScene, clicks: ClickSet,
                  prev_mask: np.ndarray | None, ground_truth: np.ndarray,
                  params: ParamStore, config: ModelConfig,
                  rng: RngStream) -> dict[str, Tensor]:
    """Training pass: posterior samples drive the prediction; returns the
    loss components {ce, dice, kl_scene, kl_objects_sum}."""
    ground_truth = np.asarray(ground_truth, dtype=np.int64)
    feats, protos = encode_points(scene, clicks, prev_mask, params, config, rng)
    missing = [m for m in range(scene.num_objects + 1) if protos.groups[m] is None]
    if missing:
        raise ValueError(f"training requires clicks for every object; missing {missing}")
    summary = summarize_prototypes(protos)

    zero = Tensor(np.zeros(()))
    kl_scene, kl_objects = zero, zero
    d = config.d
    any_latent = config.use_scene_latent or config.use_object_latent
    if any_latent:
        q_scene, z_s_sample, q_objects = infer_posteriors(
            feats, ground_truth, params, config, rng.child("post_z_s").normal(d))
    else:
        q_scene, z_s_sample, q_objects = None, Tensor(np.zeros(d)), []
    if config.use_scene_latent:
        p_scene = scene_latent_prior(summary, params, config)
        kl_scene = gaussian_kl(q_scene, p_scene)

    samples: list[Tensor | None] = [None] * (scene.num_objects + 1)
    if config.use_object_latent and config.modulation_mode != "deterministic":
        eps = rng.child("post_z_o").normal((1, d))  # shared across objects
        for m in range(scene.num_objects + 1):
            p_m = object_latent_prior(z_s_sample, protos.groups[m], config.alpha,
                                      params, config)
            q_m = q_objects[m]
            kl_objects = kl_objects + gaussian_kl(q_m, p_m)
            samples[m] = q_m.mean.reshape(1, d) + q_m.stddev.reshape(1, d) * Tensor(eps)
    elif config.modulation_mode != "deterministic":
        for m in range(scene.num_objects + 1):
            samples[m] = tmean(protos.groups[m], axis=0).reshape(1, d)

    latents = HierarchicalLatents(q_scene if config.use_scene_latent else None,
                                  q_objects, z_s_sample, samples)
    modulated = modulate(protos, latents, config.modulation_mode, params, config)
    bundle = predict(feats, modulated, config)

    scaled = bundle.logits_t.T * temperature(params)
    ce = cross_entropy_loss(scaled, ground_truth)
    dice = dice_loss(softmax(scaled, axis=1), ground_truth)
    return {"ce": ce, "dice": dice, "kl_scene": kl_scene,
            "kl_objects_sum": kl_objects}
