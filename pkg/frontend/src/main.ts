/** Wires the scene list, canvas, keyboard, and service client together.
 *
 * Interaction: click labels a point with the active object (number keys
 * pick the object, 0 or Ctrl+click means background); drag orbits, wheel
 * zooms; M/U/R switch mask / uncertainty / rgb overlays; the Undo button
 * or Z reverts the last click.
 */

import { ApiError, Client, SceneData } from "./api.js";
import { boundingSphere, defaultOrbit, OrbitState, pickPoint } from "./camera.js";
import { initialViewState, OverlayMode, RequestQueue, ViewState } from "./state.js";
import { Viewer } from "./viewer.js";

const PICK_RADIUS_PX = 12;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot() {
  const canvas = el<HTMLCanvasElement>("viewer");
  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLDivElement>("status");
  const sceneSelect = el<HTMLSelectElement>("scene-select");
  const undoButton = el<HTMLButtonElement>("undo");
  const overlayButtons: Record<OverlayMode, HTMLButtonElement> = {
    rgb: el("mode-rgb"),
    mask: el("mode-mask"),
    uncertainty: el("mode-uncertainty"),
  };

  const client = new Client("");
  const viewer = new Viewer(canvas);
  let scene: SceneData | null = null;
  let orbit: OrbitState | null = null;
  const view: ViewState = initialViewState();

  const showError = (err: unknown) => {
    banner.textContent = err instanceof ApiError
      ? `service error ${err.status}: ${err.message}`
      : `network failure: ${String(err)}`;
    banner.style.display = "block";
    setTimeout(() => (banner.style.display = "none"), 4000);
  };

  const redraw = () => {
    if (scene && orbit) viewer.render(scene, view, orbit);
    const pred = view.prediction;
    const iou = pred?.iou_per_object
      ? "  IoU " + Object.entries(pred.iou_per_object)
          .map(([k, v]) => `${k}:${v.toFixed(2)}`).join(" ")
      : "";
    status.textContent =
      `object ${view.activeObject} | overlay ${view.overlay} | ` +
      `${view.markers.length} clicks${iou}`;
    for (const [mode, button] of Object.entries(overlayButtons)) {
      button.disabled = mode !== "rgb" && !pred;
      button.classList.toggle("active", mode === view.overlay);
    }
  };

  const queue = new RequestQueue(client, view, redraw, showError);

  async function loadScene(id: string) {
    try {
      scene = await client.getScene(id);
      const sphere = boundingSphere(scene.points.flatMap((r) => [r[0], r[1], r[2]]));
      orbit = defaultOrbit(sphere.center, sphere.radius);
      const session = await client.createSession(id);
      view.sessionId = session.session_id;
      view.markers = [];
      view.prediction = null;
      view.overlay = "rgb";
      view.activeObject = 1;
      redraw();
    } catch (err) {
      showError(err);
    }
  }

  try {
    const listing = await client.listScenes();
    if (listing.scenes.length === 0) {
      banner.textContent = "no scenes on the server";
      banner.style.display = "block";
      return;
    }
    for (const id of listing.scenes) {
      const opt = document.createElement("option");
      opt.value = id;
      opt.textContent = id;
      sceneSelect.appendChild(opt);
    }
    sceneSelect.onchange = () => void loadScene(sceneSelect.value);
    await loadScene(listing.scenes[0]);
  } catch (err) {
    showError(err);
    return;
  }

  // -- pointer: click to label, drag to orbit ------------------------------
  let dragging = false;
  let moved = 0;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("mousedown", (ev) => {
    dragging = true;
    moved = 0;
    last = [ev.offsetX, ev.offsetY];
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (!dragging || !orbit) return;
    const dx = ev.offsetX - last[0];
    const dy = ev.offsetY - last[1];
    moved += Math.abs(dx) + Math.abs(dy);
    last = [ev.offsetX, ev.offsetY];
    orbit.yaw -= dx * 0.008;
    orbit.pitch = Math.min(1.5, Math.max(-0.2, orbit.pitch + dy * 0.008));
    redraw();
  });
  window.addEventListener("mouseup", (ev) => {
    if (!dragging) return;
    dragging = false;
    if (moved > 4 || !scene) return;  // it was an orbit drag, not a click
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    const index = pickPoint(viewer.projected, x, y, PICK_RADIUS_PX);
    if (index < 0) return;  // empty sky: no-op
    const objectId = ev.ctrlKey ? 0 : view.activeObject;
    queue.submitClick(index, objectId);
  });
  canvas.addEventListener("wheel", (ev) => {
    if (!orbit) return;
    ev.preventDefault();
    orbit.distance *= ev.deltaY > 0 ? 1.1 : 0.9;
    redraw();
  });

  // -- keyboard -------------------------------------------------------------
  window.addEventListener("keydown", (ev) => {
    if (ev.key >= "0" && ev.key <= "9") {
      view.activeObject = Number(ev.key);
      redraw();
    } else if (ev.key === "m") {
      setOverlay("mask");
    } else if (ev.key === "u") {
      setOverlay("uncertainty");
    } else if (ev.key === "r") {
      setOverlay("rgb");
    } else if (ev.key === "z") {
      if (view.markers.length > 0) queue.submitUndo();
    }
  });

  function setOverlay(mode: OverlayMode) {
    if (mode !== "rgb" && !view.prediction) return;  // disabled until predicted
    view.overlay = mode;
    redraw();
  }

  for (const [mode, button] of Object.entries(overlayButtons)) {
    button.onclick = () => setOverlay(mode as OverlayMode);
  }
  undoButton.onclick = () => {
    if (view.markers.length > 0) queue.submitUndo();
  };

  redraw();
}

void boot();
