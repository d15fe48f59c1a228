"""HTTP service: sessions, clicks, undo, replay determinism."""

import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from npiseg.model import ModelConfig, init_params
from npiseg.scenes import SceneSpec, generate_scene, scene_to_text, write_scene
from npiseg.service import create_app
from npiseg.training import Checkpoint, save_checkpoint

from conftest import tiny_config


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    cfg = tiny_config()
    params = init_params(cfg, seed=1)
    # identity modulator (gamma=1, beta=0): clicked points match their own
    # prototype with cosine exactly 1, so the click contract is structural
    for head, bias in (("gamma", 1.0), ("beta", 0.0)):
        for layer in ("l0", "l1"):
            params[f"mod.{head}.{layer}.w"].data[:] = 0.0
            params[f"mod.{head}.{layer}.b"].data[:] = 0.0
        params[f"mod.{head}.l1.b"].data[:] = bias
    spec = SceneSpec(num_points=96, num_objects=(2, 2))
    ckpt_path = root / "model.json"
    save_checkpoint(Checkpoint(cfg, params), ckpt_path)
    scenes_dir = root / "scenes"
    scenes_dir.mkdir()
    for i in range(2):
        write_scene(generate_scene(spec, i), scenes_dir / f"scene_{i:04d}.npsc")
    app = create_app(str(ckpt_path), str(scenes_dir), seed=7)
    return TestClient(app)


def make_session(service, scene_id="scene_0000"):
    r = service.post("/sessions", json={"scene_id": scene_id})
    assert r.status_code == 201
    return r.json()


def test_scene_listing(service):
    r = service.get("/scenes")
    assert r.status_code == 200
    assert r.json()["scenes"] == ["scene_0000", "scene_0001"]


def test_create_session_from_catalog(service):
    body = make_session(service)
    assert body["num_points"] == 96
    assert body["num_objects"] == 2
    assert body["session_id"]


def test_create_session_inline_scene(service):
    scene = generate_scene(SceneSpec(num_points=64, num_objects=(2, 2)), 9)
    r = service.post("/sessions", json={"scene": scene_to_text(scene)})
    assert r.status_code == 201
    assert r.json()["num_points"] == 64


def test_bad_inline_scene_is_400(service):
    r = service.post("/sessions", json={"scene": "NPSC9 1 1\n"})
    assert r.status_code == 400
    assert "header" in r.json()["detail"]


def test_unknown_scene_id_is_404(service):
    r = service.post("/sessions", json={"scene_id": "nope"})
    assert r.status_code == 404


def test_sessions_get_distinct_ids(service):
    a, b = make_session(service), make_session(service)
    assert a["session_id"] != b["session_id"]


def test_first_click_assigns_object(service):
    session = make_session(service)
    sid = session["session_id"]
    scene = service.get("/scenes/scene_0000").json()
    labels = np.array(scene["labels"])
    idx = int(np.flatnonzero(labels == 1)[0])
    r = service.post(f"/sessions/{sid}/clicks",
                     json={"point_index": idx, "object_id": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["mask"][idx] == 1
    assert len(body["mask"]) == 96
    assert len(body["uncertainty"]) == 96
    assert body["u_min"] <= body["u_max"]
    assert set(body["iou_per_object"]) == {"1", "2"}


def test_replay_determinism_across_sessions(service):
    clicks = [{"point_index": 5, "object_id": 1},
              {"point_index": 40, "object_id": 2}]
    responses = []
    for _ in range(2):
        sid = make_session(service)["session_id"]
        for c in clicks:
            r = service.post(f"/sessions/{sid}/clicks", json=c)
        responses.append(r.json())
    assert responses[0]["mask"] == responses[1]["mask"]
    assert responses[0]["uncertainty"] == responses[1]["uncertainty"]


def test_out_of_range_click_is_422(service):
    sid = make_session(service)["session_id"]
    r = service.post(f"/sessions/{sid}/clicks",
                     json={"point_index": 10 ** 6, "object_id": 1})
    assert r.status_code == 422


def test_unknown_session_is_404(service):
    r = service.post("/sessions/nope/clicks",
                     json={"point_index": 0, "object_id": 0})
    assert r.status_code == 404
    assert service.get("/sessions/nope").status_code == 404


def test_undo_restores_previous_prediction(service):
    sid = make_session(service)["session_id"]
    r1 = service.post(f"/sessions/{sid}/clicks",
                      json={"point_index": 5, "object_id": 1})
    service.post(f"/sessions/{sid}/clicks",
                 json={"point_index": 40, "object_id": 2})
    r3 = service.post(f"/sessions/{sid}/undo")
    assert r3.status_code == 200
    assert r3.json()["mask"] == r1.json()["mask"]
    assert r3.json()["uncertainty"] == r1.json()["uncertainty"]


def test_undo_on_empty_history_is_409(service):
    sid = make_session(service)["session_id"]
    assert service.post(f"/sessions/{sid}/undo").status_code == 409


def test_two_adds_one_undo_equals_one_add(service):
    sid_a = make_session(service)["session_id"]
    service.post(f"/sessions/{sid_a}/clicks",
                 json={"point_index": 5, "object_id": 1})
    service.post(f"/sessions/{sid_a}/clicks",
                 json={"point_index": 40, "object_id": 2})
    service.post(f"/sessions/{sid_a}/undo")
    state_a = service.get(f"/sessions/{sid_a}").json()

    sid_b = make_session(service)["session_id"]
    service.post(f"/sessions/{sid_b}/clicks",
                 json={"point_index": 5, "object_id": 1})
    state_b = service.get(f"/sessions/{sid_b}").json()

    assert state_a["clicks"] == state_b["clicks"]
    assert state_a["prediction"]["mask"] == state_b["prediction"]["mask"]


def test_fresh_session_state(service):
    sid = make_session(service)["session_id"]
    state = service.get(f"/sessions/{sid}").json()
    assert state["clicks"] == []
    assert state["prediction"] is None


def test_state_lists_clicks_in_order(service):
    sid = make_session(service)["session_id"]
    sent = [{"point_index": 5, "object_id": 1},
            {"point_index": 40, "object_id": 2},
            {"point_index": 7, "object_id": 0}]
    for c in sent:
        service.post(f"/sessions/{sid}/clicks", json=c)
    state = service.get(f"/sessions/{sid}").json()
    assert state["clicks"] == sent


def test_state_is_pure_fold_of_history(service):
    """Interleaved add/undo ends at the same state as a fresh replay."""
    sid = make_session(service)["session_id"]
    service.post(f"/sessions/{sid}/clicks", json={"point_index": 3, "object_id": 1})
    service.post(f"/sessions/{sid}/clicks", json={"point_index": 9, "object_id": 2})
    service.post(f"/sessions/{sid}/undo")
    service.post(f"/sessions/{sid}/clicks", json={"point_index": 11, "object_id": 2})
    state = service.get(f"/sessions/{sid}").json()

    sid2 = make_session(service)["session_id"]
    for c in state["clicks"]:
        service.post(f"/sessions/{sid2}/clicks", json=c)
    replay = service.get(f"/sessions/{sid2}").json()
    assert replay["prediction"]["mask"] == state["prediction"]["mask"]


def test_concurrent_sessions_do_not_interact(service):
    sids = [make_session(service)["session_id"] for _ in range(4)]
    baseline = {}
    for i, sid in enumerate(sids):
        r = service.post(f"/sessions/{sid}/clicks",
                         json={"point_index": 5, "object_id": 1})
        baseline[sid] = r.json()["mask"]

    errors = []

    def hammer(sid):
        try:
            for k in range(3):
                service.post(f"/sessions/{sid}/clicks",
                             json={"point_index": 40 + k, "object_id": 2})
                service.post(f"/sessions/{sid}/undo")
            state = service.get(f"/sessions/{sid}").json()
            if state["prediction"]["mask"] != baseline[sid]:
                errors.append(sid)
        except Exception as exc:  # surface thread failures
            errors.append(repr(exc))

    threads = [threading.Thread(target=hammer, args=(sid,)) for sid in sids]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
