"""Session-based interactive segmentation over HTTP/JSON.

A server process loads one frozen checkpoint; clients create sessions
against named or inline scenes, add/undo clicks, and receive the mask
plus a per-point uncertainty map after every change. Session state is a
pure fold of its click history under a fixed per-session seed, so any
state can be reproduced by replay.

Routes: POST /sessions, POST /sessions/{id}/clicks,
POST /sessions/{id}/undo, GET /sessions/{id}, GET /scenes.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .core.rng import RngStream
from .interaction import compute_iou
from .model import Click, ClickSet, PredictionBundle, forward_infer
from .scenes import LabeledScene, read_scene, scene_from_text
from .training import load_checkpoint

__all__ = ["create_app", "Session"]

CHECKPOINT_ENV = "NPISEG_CHECKPOINT"


@dataclass
class Session:
    id: str
    scene: LabeledScene
    scene_name: str
    seed: int
    clicks: ClickSet = field(default_factory=ClickSet)
    last: PredictionBundle | None = None
    prev_mask: np.ndarray | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class ClickBody(BaseModel):
    point_index: int
    object_id: int


class SessionBody(BaseModel):
    scene_id: str | None = None
    scene: str | None = None  # inline NPSC1 body


def _prediction_payload(session: Session) -> dict:
    bundle = session.last
    if bundle is None:
        return {"mask": None, "uncertainty": None, "u_min": None,
                "u_max": None, "iou_per_object": None}
    scene = session.scene
    iou = None
    if scene.num_objects >= 1:
        iou = {str(m): compute_iou(bundle.mask, scene.labels, m)
               for m in range(1, scene.num_objects + 1)}
    return {
        "mask": bundle.mask.tolist(),
        "uncertainty": bundle.uncertainty.tolist(),
        "u_min": float(bundle.uncertainty.min()),
        "u_max": float(bundle.uncertainty.max()),
        "iou_per_object": iou,
    }


def create_app(checkpoint_path: str | None = None,
               scenes_dir: str | None = None,
               seed: int = 0, float32: bool = False) -> FastAPI:
    """Build the application with one loaded model and a scene catalog."""
    path = checkpoint_path or os.environ.get(CHECKPOINT_ENV)
    if not path:
        raise ValueError(f"no checkpoint: pass a path or set {CHECKPOINT_ENV}")
    ckpt = load_checkpoint(path)
    params, config = ckpt.params, ckpt.config
    if float32:
        params.cast_(np.float32)

    catalog: dict[str, Path] = {}
    if scenes_dir:
        for p in sorted(Path(scenes_dir).glob("*.npsc")):
            catalog[p.stem] = p

    app = FastAPI(title="npiseg interactive segmentation")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    counter = {"n": 0}

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session: {session_id}")
        return session

    def recompute(session: Session) -> None:
        """State is a pure fold of the click history under the session seed."""
        if len(session.clicks) == 0:
            session.last = None
            session.prev_mask = None
            return
        rng = RngStream(session.seed).child("session")
        if config.use_prev_mask:
            prev = None
            bundle = None
            for k in range(1, len(session.clicks) + 1):
                prefix = ClickSet(session.clicks.clicks[:k])
                bundle = forward_infer(session.scene, prefix, prev, params,
                                       config, rng)
                prev = bundle.mask
            session.last = bundle
            session.prev_mask = prev
        else:
            session.last = forward_infer(session.scene, session.clicks, None,
                                         params, config, rng)
            session.prev_mask = session.last.mask

    @app.get("/scenes")
    def list_scenes():
        return {"scenes": sorted(catalog)}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionBody):
        if (body.scene_id is None) == (body.scene is None):
            raise HTTPException(status_code=400,
                                detail="provide exactly one of scene_id or scene")
        if body.scene_id is not None:
            if body.scene_id not in catalog:
                raise HTTPException(status_code=404,
                                    detail=f"unknown scene: {body.scene_id}")
            scene = read_scene(catalog[body.scene_id])
            name = body.scene_id
        else:
            try:
                scene = scene_from_text(body.scene, scene_id="inline")
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            name = "inline"
        with registry_lock:
            counter["n"] += 1
            # one shared seed: a replayed click history gives an identical
            # response no matter which session it runs in
            session = Session(id=uuid.uuid4().hex, scene=scene, scene_name=name,
                              seed=seed)
            sessions[session.id] = session
        return {"session_id": session.id, "num_points": scene.num_points,
                "num_objects": scene.num_objects}

    @app.post("/sessions/{session_id}/clicks")
    def add_click(session_id: str, body: ClickBody):
        session = get_session(session_id)
        with session.lock:
            click = Click(body.point_index, body.object_id)
            try:
                ClickSet([click]).validate(session.scene)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            session.clicks.add(click)
            recompute(session)
            return _prediction_payload(session)

    @app.post("/sessions/{session_id}/undo")
    def undo_click(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if len(session.clicks) == 0:
                raise HTTPException(status_code=409, detail="no clicks to undo")
            session.clicks.pop()
            recompute(session)
            return _prediction_payload(session)

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            payload = _prediction_payload(session)
            return {
                "session_id": session.id,
                "scene_id": session.scene_name,
                "num_points": session.scene.num_points,
                "num_objects": session.scene.num_objects,
                "clicks": [{"point_index": c.point_index,
                            "object_id": c.object_id}
                           for c in session.clicks],
                "prediction": payload if session.last is not None else None,
            }

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        if scene_id not in catalog:
            raise HTTPException(status_code=404,
                                detail=f"unknown scene: {scene_id}")
        scene = read_scene(catalog[scene_id])
        return {
            "scene_id": scene_id,
            "num_points": scene.num_points,
            "num_objects": scene.num_objects,
            "points": scene.points.tolist(),
            "labels": scene.labels.tolist(),
        }

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
