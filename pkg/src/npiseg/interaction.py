"""Click simulation for training and evaluation, plus the episode metrics.

Evaluation follows the standard protocol: the first click per object is
the point nearest the object centroid; every later click lands at the
centroid-nearest point of the largest connected component of currently
misclassified points (components under a radius graph, computed per
ground-truth label). IoU@k means "k clicks per object" under round-robin
refinement; NoC@q is budget-capped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core.rng import RngStream
from .model import Click, ClickSet, PredictionBundle
from .scenes import LabeledScene

__all__ = [
    "clicks_per_object_state",
    "SimConfig", "RoundRecord", "EpisodeRecord", "center_click", "next_click",
    "simulate_training_clicks", "compute_iou", "compute_noc", "run_episode",
    "aggregate_metrics", "mean_nn_distance",
]

# predict_fn(scene, clicks, rng, prev_mask=None) -> PredictionBundle
PredictFn = Callable[..., PredictionBundle]


@dataclass
class SimConfig:
    k_max: int = 20                    # per-object click budget
    init_clicks: tuple[int, int] = (1, 3)  # random initial clicks per object
    n_iter: int = 3                    # max iterative clicks during training
    rho: float = 2.0                   # radius factor on mean NN distance
    round_robin: bool = True           # one click per object per round;
                                       # False refines only the worst region

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.n_iter < 0:
            raise ValueError("n_iter must be >= 0")
        lo, hi = self.init_clicks
        if not 1 <= lo <= hi:
            raise ValueError("init_clicks range must be nonempty and positive")


@dataclass
class RoundRecord:
    clicks_added: list[Click]
    per_object_iou: dict[int, float]
    mean_iou: float
    mean_uncertainty: float


@dataclass
class EpisodeRecord:
    rounds: list[RoundRecord]
    budget: int
    converged: bool
    clicks_per_object: dict[int, int]
    scene_id: str = ""

    @property
    def iou_curve(self) -> list[float]:
        return [r.mean_iou for r in self.rounds]

    @property
    def uncertainty_curve(self) -> list[float]:
        return [r.mean_uncertainty for r in self.rounds]


def mean_nn_distance(scene: LabeledScene) -> float:
    """Mean nearest-neighbor distance over all scene points; memoized."""
    cached = getattr(scene, "_nn_dist", None)
    if cached is None:
        d, _ = cKDTree(scene.xyz).query(scene.xyz, k=2)
        cached = float(d[:, 1].mean())
        object.__setattr__(scene, "_nn_dist", cached)
    return cached


def center_click(scene: LabeledScene, object_id: int) -> Click:
    """The object's point nearest its centroid (ties: lower point index)."""
    idx = np.flatnonzero(scene.labels == object_id)
    if idx.size == 0:
        raise ValueError(f"object {object_id} has no points")
    pts = scene.xyz[idx]
    centroid = pts.mean(axis=0)
    chosen = idx[int(np.argmin(((pts - centroid) ** 2).sum(axis=1)))]
    return Click(int(chosen), int(object_id))


def _components(points: np.ndarray, radius: float) -> np.ndarray:
    """Component id per point under the radius graph."""
    n = len(points)
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def next_click(pred_mask: np.ndarray, scene: LabeledScene,
               sim: SimConfig | None = None,
               exclude: frozenset[int] = frozenset(),
               allowed_labels: frozenset[int] | None = None) -> Click | None:
    """Error-driven click: centroid-nearest point of the largest connected
    misclassified region, grouped per ground-truth label. Returns None
    when nothing (clickable) is misclassified."""
    sim = sim or SimConfig()
    pred_mask = np.asarray(pred_mask)
    if pred_mask.shape != scene.labels.shape:
        raise ValueError("prediction mask does not match the scene")
    wrong = pred_mask != scene.labels
    if exclude:
        wrong = wrong.copy()
        wrong[np.fromiter(exclude, dtype=np.intp)] = False
    if allowed_labels is not None:
        wrong = wrong & np.isin(scene.labels, list(allowed_labels))
    if not wrong.any():
        return None
    radius = sim.rho * mean_nn_distance(scene)

    best_key, best_members, best_label = None, None, None
    for label in np.unique(scene.labels[wrong]):
        idx = np.flatnonzero(wrong & (scene.labels == label))
        comp_ids = _components(scene.xyz[idx], radius)
        for c in np.unique(comp_ids):
            members = idx[comp_ids == c]
            key = (-members.size, int(label), int(members.min()))
            if best_key is None or key < best_key:
                best_key, best_members, best_label = key, members, int(label)

    pts = scene.xyz[best_members]
    centroid = pts.mean(axis=0)
    chosen = best_members[int(np.argmin(((pts - centroid) ** 2).sum(axis=1)))]
    return Click(int(chosen), best_label)


def simulate_training_clicks(scene: LabeledScene,
                             model_predict: Callable[[ClickSet], np.ndarray],
                             sim: SimConfig, rng: RngStream) -> ClickSet:
    """Random initial clicks per object (plus a background click half the
    time), then 0..n_iter error-driven clicks against the current model."""
    clicks = ClickSet()
    lo, hi = sim.init_clicks
    for m in range(1, scene.num_objects + 1):
        pool = np.flatnonzero(scene.labels == m)
        count = min(int(rng.child(f"count:{m}").integers(lo, hi)), pool.size)
        for idx in rng.child(f"pick:{m}").generator.choice(pool, count, replace=False):
            clicks.add(Click(int(idx), m))
    bg_pool = np.flatnonzero(scene.labels == 0)
    if bg_pool.size and rng.child("bg?").uniform() < 0.5:
        clicks.add(Click(int(rng.child("bg_pick").generator.choice(bg_pool)), 0))

    rounds = int(rng.child("rounds").integers(0, sim.n_iter)) if sim.n_iter else 0
    prev = None
    for _ in range(rounds):
        pred = model_predict(clicks, prev)
        click = next_click(pred, scene, sim)
        if click is None:
            break
        clicks.add(click)
        prev = pred
    return clicks


def compute_iou(pred_mask: np.ndarray, gt_mask: np.ndarray, object_id: int) -> float:
    pred_mask, gt_mask = np.asarray(pred_mask), np.asarray(gt_mask)
    if pred_mask.shape != gt_mask.shape:
        raise ValueError("mask length mismatch")
    p = pred_mask == object_id
    g = gt_mask == object_id
    union = int(np.sum(p | g))
    if union == 0:
        return 1.0
    return float(np.sum(p & g)) / union


def compute_noc(iou_curve, threshold: float, budget: int = 20) -> int:
    """Smallest click count reaching the threshold, or the budget if never."""
    curve = list(iou_curve)
    if not curve:
        raise ValueError("empty IoU curve")
    for k, value in enumerate(curve, start=1):
        if value >= threshold:
            return k
    return budget


def _round_record(bundle: PredictionBundle, scene: LabeledScene,
                  added: list[Click]) -> RoundRecord:
    per_object = {m: compute_iou(bundle.mask, scene.labels, m)
                  for m in range(1, scene.num_objects + 1)}
    mean_iou = float(np.mean(list(per_object.values()))) if per_object else 1.0
    return RoundRecord(added, per_object, mean_iou, float(bundle.uncertainty.mean()))


def run_episode(predict_fn: PredictFn, scene: LabeledScene, sim: SimConfig,
                rng: RngStream) -> EpisodeRecord:
    """Interactive refinement against the simulated user.

    Round 1 gives every object its centroid click. In each later round
    every label (background included) receives at most one error-driven
    click, largest error region first, re-predicting after each click;
    with round_robin off, a round is a single click on the globally
    largest error region instead. Stops on convergence, when nothing
    clickable remains, or after k_max rounds, so no object ever exceeds
    k_max clicks.
    """
    clicks = ClickSet([center_click(scene, m)
                       for m in range(1, scene.num_objects + 1)])
    counts = {m: 0 for m in range(scene.num_objects + 1)}
    for c in clicks:
        counts[c.object_id] += 1
    clicked_points = {c.point_index for c in clicks}

    # one fixed noise stream for the whole episode (the interactive
    # service replays sessions the same way): across-round differences
    # then reflect conditioning, not latent resampling
    noise = rng.child("noise")
    bundle = predict_fn(scene, clicks, noise, prev_mask=None)
    rounds = [_round_record(bundle, scene, list(clicks))]
    converged = bool(np.array_equal(bundle.mask, scene.labels))

    for round_no in range(2, sim.k_max + 1):
        if converged:
            break
        added: list[Click] = []
        remaining = set(range(scene.num_objects + 1))
        while remaining and not converged:
            allowed = frozenset(remaining) if sim.round_robin else None
            click = next_click(bundle.mask, scene, sim,
                               exclude=frozenset(clicked_points),
                               allowed_labels=allowed)
            if click is None:
                break
            clicks.add(click)
            clicked_points.add(click.point_index)
            counts[click.object_id] += 1
            added.append(click)
            bundle = predict_fn(scene, clicks, noise, prev_mask=bundle.mask)
            converged = bool(np.array_equal(bundle.mask, scene.labels))
            if sim.round_robin:
                remaining.discard(click.object_id)
            else:
                break
        if not added:
            break
        rounds.append(_round_record(bundle, scene, added))

    return EpisodeRecord(rounds, sim.k_max, converged, counts,
                         scene_id=scene.scene_id)


def clicks_per_object_state(predict_fn: PredictFn, scene: LabeledScene,
                            budget: int, sim: SimConfig,
                            noise: RngStream) -> PredictionBundle:
    """Interactive state after exactly `budget` clicks per object.

    Round 1 places the centroid click; later rounds give each object one
    error-driven click while it has misclassified points, else the next
    unclicked point nearest its centroid (a confirmation click). The
    previous mask threads through, and one noise stream serves the whole
    chain, mirroring the service's session replay."""
    clicks = ClickSet([center_click(scene, m)
                       for m in range(1, scene.num_objects + 1)])
    clicked = {c.point_index for c in clicks}
    bundle = predict_fn(scene, clicks, noise, prev_mask=None)
    prev = bundle.mask
    for _ in range(budget - 1):
        for m in range(1, scene.num_objects + 1):
            click = next_click(bundle.mask, scene, sim,
                               exclude=frozenset(clicked),
                               allowed_labels=frozenset({m}))
            if click is None:
                pool = np.flatnonzero(scene.labels == m)
                pool = pool[~np.isin(pool, list(clicked))]
                if pool.size == 0:
                    continue
                centroid = scene.xyz[scene.labels == m].mean(axis=0)
                d2 = ((scene.xyz[pool] - centroid) ** 2).sum(axis=1)
                click = Click(int(pool[int(np.argmin(d2))]), m)
            clicks.add(click)
            clicked.add(click.point_index)
            bundle = predict_fn(scene, clicks, noise, prev_mask=prev)
            prev = bundle.mask
    return bundle


def aggregate_metrics(episodes: list[EpisodeRecord],
                      ks=(1, 2, 3, 5, 10, 15),
                      qs=(0.8, 0.85, 0.9)) -> dict:
    """Average per-episode curves; converged episodes carry their last IoU
    forward. Keys are JSON-stable strings: iou_at.k and noc_at.q."""
    if not episodes:
        raise ValueError("no episodes to aggregate")
    budget = max(e.budget for e in episodes)
    horizon = max(budget, max(ks))
    filled = []
    for e in episodes:
        curve = e.iou_curve
        filled.append(curve + [curve[-1]] * (horizon - len(curve)))
    arr = np.array(filled)
    iou_at = {str(k): float(arr[:, k - 1].mean()) for k in ks}
    noc_at = {str(q): float(np.mean([compute_noc(row[:budget], q, budget)
                                     for row in filled]))
              for q in qs}
    avg_ks = [k for k in (5, 10, 15) if str(k) in iou_at] or list(ks)
    return {
        "iou_at": iou_at,
        "noc_at": noc_at,
        "iou_avg": float(np.mean([iou_at[str(k)] for k in avg_ks])),
        "noc_avg": float(np.mean(list(noc_at.values()))),
        "episodes": len(episodes),
    }
