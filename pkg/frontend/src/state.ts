/** View state plus the single-in-flight click queue. */

import { Client, Prediction } from "./api.js";

export type OverlayMode = "rgb" | "mask" | "uncertainty";

export interface ClickMarker {
  pointIndex: number;
  objectId: number;
}

export interface ViewState {
  sessionId: string | null;
  activeObject: number;
  overlay: OverlayMode;
  markers: ClickMarker[];
  prediction: Prediction | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    activeObject: 1,
    overlay: "rgb",
    markers: [],
    prediction: null,
  };
}

type Job =
  | { kind: "click"; pointIndex: number; objectId: number }
  | { kind: "undo" };

/**
 * Serializes requests per session: one in flight, the rest queued in
 * arrival order, so the server sees a total click order.
 */
export class RequestQueue {
  private queue: Job[] = [];
  private busy = false;

  constructor(
    private client: Client,
    private state: ViewState,
    private onUpdate: (s: ViewState) => void,
    private onError: (e: unknown) => void,
  ) {}

  get pending(): number {
    return this.queue.length + (this.busy ? 1 : 0);
  }

  submitClick(pointIndex: number, objectId: number): void {
    this.queue.push({ kind: "click", pointIndex, objectId });
    void this.drain();
  }

  submitUndo(): void {
    this.queue.push({ kind: "undo" });
    void this.drain();
  }

  private async drain(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      while (this.queue.length > 0) {
        const job = this.queue.shift()!;
        if (!this.state.sessionId) continue;
        try {
          let prediction: Prediction;
          if (job.kind === "click") {
            prediction = await this.client.addClick(
              this.state.sessionId, job.pointIndex, job.objectId);
            this.state.markers.push({
              pointIndex: job.pointIndex,
              objectId: job.objectId,
            });
          } else {
            prediction = await this.client.undo(this.state.sessionId);
            this.state.markers.pop();
          }
          this.state.prediction = prediction;
          this.onUpdate(this.state);
        } catch (err) {
          this.onError(err);
        }
      }
    } finally {
      this.busy = false;
    }
  }
}
