/** Canvas renderer: points with overlay coloring, click markers, orbit. */

import { OrbitState, Projected, project } from "./camera.js";
import { heatColor, labelColor, rgbColor } from "./palette.js";
import { SceneData } from "./api.js";
import { OverlayMode, ViewState } from "./state.js";

export class Viewer {
  private ctx: CanvasRenderingContext2D;
  projected: Projected[] = [];

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  pointColors(scene: SceneData, view: ViewState): string[] {
    const mode: OverlayMode = view.overlay;
    const pred = view.prediction;
    const colors: string[] = new Array(scene.num_points);
    for (let i = 0; i < scene.num_points; i++) {
      if (mode === "mask" && pred) {
        colors[i] = labelColor(pred.mask[i]);
      } else if (mode === "uncertainty" && pred) {
        colors[i] = heatColor(pred.uncertainty[i], pred.u_min, pred.u_max);
      } else {
        const row = scene.points[i];
        colors[i] = rgbColor(row[3], row[4], row[5]);
      }
    }
    return colors;
  }

  render(scene: SceneData, view: ViewState, orbit: OrbitState): void {
    const { width, height } = this.canvas;
    const flat = new Float64Array(scene.num_points * 3);
    for (let i = 0; i < scene.num_points; i++) {
      flat[3 * i] = scene.points[i][0];
      flat[3 * i + 1] = scene.points[i][1];
      flat[3 * i + 2] = scene.points[i][2];
    }
    this.projected = project(flat, orbit, width, height);
    const colors = this.pointColors(scene, view);

    this.ctx.fillStyle = "#111418";
    this.ctx.fillRect(0, 0, width, height);

    // far points first so near ones draw on top
    const order = this.projected
      .map((p, i) => i)
      .filter((i) => this.projected[i].visible)
      .sort((a, b) => this.projected[b].depth - this.projected[a].depth);
    for (const i of order) {
      const p = this.projected[i];
      const r = Math.min(6, Math.max(1.6, 90 / p.depth / 10));
      this.ctx.fillStyle = colors[i];
      this.ctx.beginPath();
      this.ctx.arc(p.x, p.y, r, 0, 2 * Math.PI);
      this.ctx.fill();
    }

    for (const marker of view.markers) {
      const p = this.projected[marker.pointIndex];
      if (!p || !p.visible) continue;
      this.ctx.strokeStyle = "#ffffff";
      this.ctx.lineWidth = 2;
      this.ctx.beginPath();
      this.ctx.arc(p.x, p.y, 7, 0, 2 * Math.PI);
      this.ctx.stroke();
      this.ctx.fillStyle = labelColor(marker.objectId);
      this.ctx.beginPath();
      this.ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
      this.ctx.fill();
    }
  }
}
