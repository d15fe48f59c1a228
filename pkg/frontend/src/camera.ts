/** Orbit camera over a point cloud plus perspective projection. */

export interface OrbitState {
  target: [number, number, number];
  distance: number;
  yaw: number;   // radians around +z
  pitch: number; // radians above the xy plane
  fov: number;   // vertical, radians
}

export function defaultOrbit(center: [number, number, number], radius: number): OrbitState {
  return {
    target: center,
    distance: Math.max(radius * 2.5, 0.1),
    yaw: Math.PI / 4,
    pitch: Math.PI / 5,
    fov: Math.PI / 4,
  };
}

export function cameraPosition(o: OrbitState): [number, number, number] {
  const cp = Math.cos(o.pitch);
  return [
    o.target[0] + o.distance * cp * Math.cos(o.yaw),
    o.target[1] + o.distance * cp * Math.sin(o.yaw),
    o.target[2] + o.distance * Math.sin(o.pitch),
  ];
}

export interface Projected {
  x: number;
  y: number;
  depth: number;   // camera-space distance along the view axis
  visible: boolean;
}

/**
 * Projects world points to pixel coordinates (z-up world). Returns one
 * entry per point; `visible` is false behind the near plane.
 */
export function project(
  points: Float64Array | number[],
  o: OrbitState,
  width: number,
  height: number,
): Projected[] {
  const eye = cameraPosition(o);
  const [tx, ty, tz] = o.target;
  // forward = normalized (target - eye)
  let fx = tx - eye[0], fy = ty - eye[1], fz = tz - eye[2];
  const fl = Math.hypot(fx, fy, fz);
  fx /= fl; fy /= fl; fz /= fl;
  // right = forward x up(0,0,1), then renormalize
  let rx = fy, ry = -fx, rz = 0;
  const rl = Math.hypot(rx, ry, rz) || 1;
  rx /= rl; ry /= rl;
  // true up = right x forward
  const ux = ry * fz - rz * fy;
  const uy = rz * fx - rx * fz;
  const uz = rx * fy - ry * fx;

  const f = (height / 2) / Math.tan(o.fov / 2);
  const near = 1e-3;
  const out: Projected[] = [];
  const n = points.length / 3;
  for (let i = 0; i < n; i++) {
    const px = points[3 * i] - eye[0];
    const py = points[3 * i + 1] - eye[1];
    const pz = points[3 * i + 2] - eye[2];
    const cz = px * fx + py * fy + pz * fz;        // depth
    const cx = px * rx + py * ry + pz * rz;
    const cy = px * ux + py * uy + pz * uz;
    if (cz < near) {
      out.push({ x: -1, y: -1, depth: cz, visible: false });
      continue;
    }
    out.push({
      x: width / 2 + (cx / cz) * f,
      y: height / 2 - (cy / cz) * f,
      depth: cz,
      visible: true,
    });
  }
  return out;
}

/** Nearest visible projected point within `radius` pixels, or -1. */
export function pickPoint(
  projected: Projected[],
  x: number,
  y: number,
  radius: number,
): number {
  let best = -1;
  let bestD = radius * radius;
  for (let i = 0; i < projected.length; i++) {
    const p = projected[i];
    if (!p.visible) continue;
    const d = (p.x - x) * (p.x - x) + (p.y - y) * (p.y - y);
    if (d < bestD || (d === bestD && best >= 0 && i < best)) {
      bestD = d;
      best = i;
    }
  }
  return best;
}

export function boundingSphere(points: Float64Array | number[]): {
  center: [number, number, number];
  radius: number;
} {
  const n = points.length / 3;
  const c: [number, number, number] = [0, 0, 0];
  for (let i = 0; i < n; i++) {
    c[0] += points[3 * i];
    c[1] += points[3 * i + 1];
    c[2] += points[3 * i + 2];
  }
  c[0] /= n; c[1] /= n; c[2] /= n;
  let r2 = 0;
  for (let i = 0; i < n; i++) {
    const dx = points[3 * i] - c[0];
    const dy = points[3 * i + 1] - c[1];
    const dz = points[3 * i + 2] - c[2];
    r2 = Math.max(r2, dx * dx + dy * dy + dz * dz);
  }
  return { center: c, radius: Math.sqrt(r2) };
}
