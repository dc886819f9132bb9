/**
 * Client-side pose math, mirroring the server's conventions exactly:
 * camera-to-world poses, camera x right / y down / z forward, quaternions
 * as (w, x, y, z). Yaw and pitch post-multiply, i.e. rotate about the
 * camera's own axes.
 */

export type Quat = [number, number, number, number]; // w, x, y, z
export type Vec3 = [number, number, number];

export interface Pose {
  quaternion: Quat;
  translation: Vec3;
}

export function identityPose(): Pose {
  return { quaternion: [1, 0, 0, 0], translation: [0, 0, 0] };
}

export function clonePose(p: Pose): Pose {
  return { quaternion: [...p.quaternion], translation: [...p.translation] };
}

export function normalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) throw new Error("zero quaternion");
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function axisAngle(axis: Vec3, angle: number): Quat {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s];
}

/** Columns of the rotation matrix: the camera axes in world coordinates. */
export function rotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  // q * (0, v) * q^-1 expanded
  const uvx = y * v[2] - z * v[1];
  const uvy = z * v[0] - x * v[2];
  const uvz = x * v[1] - y * v[0];
  const uuvx = y * uvz - z * uvy;
  const uuvy = z * uvx - x * uvz;
  const uuvz = x * uvy - y * uvx;
  return [
    v[0] + 2 * (w * uvx + uuvx),
    v[1] + 2 * (w * uvy + uuvy),
    v[2] + 2 * (w * uvz + uuvz),
  ];
}

export function forwardAxis(q: Quat): Vec3 {
  return rotate(q, [0, 0, 1]);
}

export function rightAxis(q: Quat): Vec3 {
  return rotate(q, [1, 0, 0]);
}

export function translate(pose: Pose, local: Vec3): Pose {
  const world = rotate(pose.quaternion, local);
  return {
    quaternion: [...pose.quaternion],
    translation: [
      pose.translation[0] + world[0],
      pose.translation[1] + world[1],
      pose.translation[2] + world[2],
    ],
  };
}

/** Positive yaw turns the view toward image-right. */
export function yaw(pose: Pose, angle: number): Pose {
  const q = quatMultiply(pose.quaternion, axisAngle([0, 1, 0], angle));
  return { quaternion: normalize(q), translation: [...pose.translation] };
}

/** Positive pitch tilts the view toward image-down. */
export function pitch(pose: Pose, angle: number): Pose {
  const q = quatMultiply(pose.quaternion, axisAngle([1, 0, 0], angle));
  return { quaternion: normalize(q), translation: [...pose.translation] };
}

export function poseToWire(pose: Pose): { quaternion: number[]; translation: number[] } {
  return { quaternion: [...normalize(pose.quaternion)], translation: [...pose.translation] };
}

export function poseApproxEqual(a: Pose, b: Pose, tol = 1e-9): boolean {
  // q and -q encode the same rotation
  const dot = a.quaternion.reduce((s, v, i) => s + v * b.quaternion[i], 0);
  const rotClose = Math.abs(Math.abs(dot) - 1) <= tol;
  const transClose = a.translation.every((v, i) => Math.abs(v - b.translation[i]) <= tol);
  return rotClose && transClose;
}
