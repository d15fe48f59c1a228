"""Synthetic labeled 3D scenes and the NPSC1 on-disk format.

Scenes are desk-scale stand-ins for room scans: a planar background slab
plus a handful of primitive shapes (sphere, box, cylinder), each with a
distinct base color so that geometry and color are correlated cues.

NPSC1 format: line 1 is ``NPSC1 <N> <M>``, then N lines
``x y z r g b label`` in 6-decimal fixed point, UTF-8, LF endings.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .core.rng import RngStream

__all__ = ["LabeledScene", "SceneSpec", "generate_scene", "write_scene",
           "read_scene", "scene_to_text", "scene_from_text"]

# saturated, well-separated base colors for objects 1..8
_PALETTE = np.array([
    [0.90, 0.10, 0.10],
    [0.10, 0.35, 0.90],
    [0.95, 0.80, 0.10],
    [0.10, 0.80, 0.30],
    [0.80, 0.15, 0.85],
    [0.95, 0.50, 0.10],
    [0.15, 0.85, 0.85],
    [0.60, 0.40, 0.10],
])


@dataclass
class LabeledScene:
    """Point cloud with per-point ground-truth object labels.

    points: (N, 6) float array of x, y, z, r, g, b (meters / [0,1]).
    labels: (N,) ints in 0..num_objects, 0 being background.
    """

    points: np.ndarray
    labels: np.ndarray
    num_objects: int
    scene_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.validate()

    def validate(self) -> None:
        n = self.points.shape[0]
        if n < 1 or self.points.shape != (n, 6):
            raise ValueError("points must be a nonempty (N, 6) array")
        if self.labels.shape != (n,):
            raise ValueError("labels must align with points")
        if self.labels.min() < 0 or self.labels.max() > self.num_objects:
            raise ValueError(f"labels must lie in 0..{self.num_objects}")
        present = np.bincount(self.labels, minlength=self.num_objects + 1)
        missing = [m for m in range(1, self.num_objects + 1) if present[m] == 0]
        if missing:
            raise ValueError(f"objects without points: {missing}")
        colors = self.points[:, 3:6]
        if colors.min() < 0.0 or colors.max() > 1.0:
            raise ValueError("colors must lie in [0, 1]")

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def rgb(self) -> np.ndarray:
        return self.points[:, 3:6]


@dataclass
class SceneSpec:
    """Knobs for the synthetic scene family.

    Objects are small clusters of 1..max parts primitive parts drawn from
    a limited color palette, so nearby objects can share appearance: a
    single click is then genuinely ambiguous about part ownership, and
    extra clicks carry real information.
    """

    num_points: int = 1024
    num_objects: tuple[int, int] = (2, 4)
    shapes: tuple[str, ...] = ("sphere", "box", "cylinder")
    jitter: float = 0.02
    color_noise: float = 0.08
    extent: float = 4.0
    parts_per_object: tuple[int, int] = (1, 3)
    palette_size: int = 3

    def __post_init__(self):
        lo, hi = self.num_objects
        if not (1 <= lo <= hi):
            raise ValueError("num_objects range must be nonempty and positive")
        if not self.shapes:
            raise ValueError("shape set must be nonempty")
        if self.jitter < 0 or self.color_noise < 0:
            raise ValueError("noise stddevs must be >= 0")
        plo, phi = self.parts_per_object
        if not (1 <= plo <= phi):
            raise ValueError("parts_per_object range must be nonempty")
        if self.palette_size < 1:
            raise ValueError("palette_size must be >= 1")


def _sample_shape(kind: str, count: int, radius: float, rng: RngStream) -> np.ndarray:
    """Points on the surface of a unit-pose primitive, scaled by radius."""
    if kind == "sphere":
        v = rng.normal((count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * radius
    if kind == "box":
        half = radius * np.array([1.0, 0.8, 0.6])
        u = rng.uniform(-1.0, 1.0, (count, 3)) * half
        face = rng.integers(0, 5, count)
        axis = face % 3
        sign = np.where(face < 3, 1.0, -1.0)
        u[np.arange(count), axis] = sign * half[axis]
        return u
    if kind == "cylinder":
        theta = rng.uniform(0.0, 2 * np.pi, count)
        z = rng.uniform(-1.0, 1.0, count) * radius
        return np.stack([radius * 0.8 * np.cos(theta),
                         radius * 0.8 * np.sin(theta), z], axis=1)
    raise ValueError(f"unknown shape kind: {kind}")


def generate_scene(spec: SceneSpec, seed: int) -> LabeledScene:
    """Deterministically build a labeled scene from (spec, seed)."""
    rng = RngStream(seed).child("scene")
    m = int(rng.child("layout").integers(spec.num_objects[0], spec.num_objects[1]))
    n = spec.num_points

    # per-object point budgets; each at least n/(3(m+1)) > n/(4(m+1))
    lo = max(1, n // (3 * (m + 1)))
    hi = max(lo, n // (2 * (m + 1)))
    counts = [int(rng.child(f"count:{i}").integers(lo, hi)) for i in range(m)]
    n_bg = n - sum(counts)
    if n_bg < 1:
        raise ValueError("spec infeasible: no room left for background points")

    radius = min(0.45, spec.extent / 8.0)
    margin = spec.extent / 2.0 - radius * 1.2
    if margin <= 0:
        raise ValueError("spec infeasible: extent too small for object radius")
    place = rng.child("place")
    centers: list[np.ndarray] = []
    for i in range(m):
        ok = False
        for _ in range(200):
            c = place.uniform(-margin, margin, 2)
            if all(np.linalg.norm(c - prev) > 2.4 * radius for prev in centers):
                centers.append(c)
                ok = True
                break
        if not ok:
            raise ValueError(f"spec infeasible: cannot place {m} objects "
                             f"in extent {spec.extent}")

    shape_pick = rng.child("shapes")
    color_order = list(range(len(_PALETTE)))
    rng.child("palette").shuffle(color_order)
    palette = _PALETTE[color_order[:spec.palette_size]]

    chunks, labels = [], []
    half = spec.extent / 2.0
    bg_xy = rng.child("bg").uniform(-half, half, (n_bg, 2))
    bg = np.concatenate([bg_xy, np.zeros((n_bg, 1))], axis=1)
    bg_gray = float(rng.child("bg_color").uniform(0.35, 0.65))
    bg_rgb = np.full((n_bg, 3), bg_gray)
    chunks.append(np.concatenate([bg, bg_rgb], axis=1))
    labels.append(np.zeros(n_bg, dtype=np.int64))

    plo, phi = spec.parts_per_object
    for i in range(m):
        obj_rng = rng.child(f"obj:{i}")
        n_parts = int(obj_rng.child("parts").integers(plo, phi))
        split = np.full(n_parts, counts[i] // n_parts)
        split[:counts[i] % n_parts] += 1
        pts_parts, rgb_parts = [], []
        for p in range(n_parts):
            kind = spec.shapes[int(shape_pick.child(f"{i}:{p}").integers(
                0, len(spec.shapes) - 1))]
            r = float(obj_rng.child(f"radius:{p}").uniform(0.18, radius * 0.8))
            part = _sample_shape(kind, int(split[p]), r, obj_rng.child(f"shape:{p}"))
            offset = obj_rng.child(f"offset:{p}").uniform(-radius * 1.6,
                                                          radius * 1.6, 2)
            part += np.array([centers[i][0] + offset[0],
                              centers[i][1] + offset[1], r + 0.05])
            pts_parts.append(part)
            # parts draw colors independently: one click sees one part, so
            # the object's composition stays ambiguous until more arrive
            color = palette[int(obj_rng.child(f"color:{p}").integers(
                0, len(palette) - 1))]
            rgb_parts.append(np.tile(color, (int(split[p]), 1)))
        pts = np.concatenate(pts_parts, axis=0)
        rgb = np.concatenate(rgb_parts, axis=0)
        chunks.append(np.concatenate([pts, rgb], axis=1))
        labels.append(np.full(counts[i], i + 1, dtype=np.int64))

    points = np.concatenate(chunks, axis=0)
    labels = np.concatenate(labels)

    noise = rng.child("noise")
    points[:, :3] += noise.normal((n, 3)) * spec.jitter
    points[:, 3:6] += noise.normal((n, 3)) * spec.color_noise
    points[:, 3:6] = np.clip(points[:, 3:6], 0.0, 1.0)

    order = rng.child("shuffle").generator.permutation(n)
    return LabeledScene(points[order], labels[order], m, scene_id=f"seed{seed}")


# -- NPSC1 serialization -------------------------------------------------------

def scene_to_text(scene: LabeledScene) -> str:
    out = io.StringIO()
    out.write(f"NPSC1 {scene.num_points} {scene.num_objects}\n")
    for row, label in zip(scene.points, scene.labels):
        out.write("%.6f %.6f %.6f %.6f %.6f %.6f %d\n" % (*row, label))
    return out.getvalue()


def scene_from_text(text: str, scene_id: str = "") -> LabeledScene:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty scene file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "NPSC1":
        raise ValueError(f"malformed NPSC1 header: {lines[0]!r}")
    try:
        n, m = int(header[1]), int(header[2])
    except ValueError as exc:
        raise ValueError(f"malformed NPSC1 header: {lines[0]!r}") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ValueError(f"point count mismatch: header says {n}, file has {len(body)}")
    points = np.empty((n, 6))
    labels = np.empty(n, dtype=np.int64)
    for i, ln in enumerate(body):
        cols = ln.split()
        if len(cols) != 7:
            raise ValueError(f"line {i + 2}: expected 7 columns, got {len(cols)}")
        points[i] = [float(c) for c in cols[:6]]
        labels[i] = int(cols[6])
    if labels.size and (labels.min() < 0 or labels.max() > m):
        raise ValueError(f"label out of range 0..{m}")
    return LabeledScene(points, labels, m, scene_id=scene_id)


def write_scene(scene: LabeledScene, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(scene_to_text(scene))


def read_scene(path) -> LabeledScene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_text(fh.read(), scene_id=str(path))
