/** Typed client for the segmentation service JSON routes. */

export interface SceneData {
  scene_id: string;
  num_points: number;
  num_objects: number;
  points: number[][]; // x y z r g b
  labels: number[];
}

export interface SessionInfo {
  session_id: string;
  num_points: number;
  num_objects: number;
}

export interface Prediction {
  mask: number[];
  uncertainty: number[];
  u_min: number;
  u_max: number;
  iou_per_object: Record<string, number> | null;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class Client {
  constructor(private base: string = "", private fetchFn: FetchLike = fetch.bind(globalThis)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        /* not json */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  listScenes(): Promise<{ scenes: string[] }> {
    return this.request("/scenes");
  }

  getScene(id: string): Promise<SceneData> {
    return this.request(`/scenes/${id}`);
  }

  createSession(sceneId: string): Promise<SessionInfo> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scene_id: sceneId }),
    });
  }

  addClick(sessionId: string, pointIndex: number, objectId: number): Promise<Prediction> {
    return this.request(`/sessions/${sessionId}/clicks`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ point_index: pointIndex, object_id: objectId }),
    });
  }

  undo(sessionId: string): Promise<Prediction> {
    return this.request(`/sessions/${sessionId}/undo`, { method: "POST" });
  }
}
