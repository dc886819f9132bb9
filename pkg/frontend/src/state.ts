/**
 * Viewer state and the input reducer: keyboard/mouse events move the pose,
 * every movement lands in a bounded trajectory ring buffer, and the caller
 * is told a new frame is wanted.
 */
import { Pose, clonePose, identityPose, pitch, translate, yaw } from "./pose.js";

export type ViewerMode = "live" | "compare";
export type JobStatus = "idle" | "running" | "done" | "failed";

export const RING_CAPACITY = 64;
export const REFINE_MAX_POSES = 16;

export interface ViewerState {
  pose: Pose;
  speed: number;
  turnSpeed: number;
  world: string;
  mode: ViewerMode;
  trajectory: Pose[]; // ring buffer of the most recent poses, oldest first
  jobStatus: JobStatus;
}

export function initialState(start?: Pose): ViewerState {
  return {
    pose: start ? clonePose(start) : identityPose(),
    speed: 0.4,
    turnSpeed: Math.PI / 24,
    world: "coarse",
    mode: "live",
    trajectory: [],
    jobStatus: "idle",
  };
}

export type NavInput =
  | { kind: "forward" }
  | { kind: "back" }
  | { kind: "strafe_left" }
  | { kind: "strafe_right" }
  | { kind: "yaw"; amount: number }
  | { kind: "pitch"; amount: number };

export const KEY_BINDINGS: Record<string, NavInput> = {
  w: { kind: "forward" },
  s: { kind: "back" },
  a: { kind: "strafe_left" },
  d: { kind: "strafe_right" },
  ArrowUp: { kind: "forward" },
  ArrowDown: { kind: "back" },
  ArrowLeft: { kind: "yaw", amount: -1 },
  ArrowRight: { kind: "yaw", amount: 1 },
};

export function navigate(state: ViewerState, input: NavInput): ViewerState {
  let pose: Pose;
  switch (input.kind) {
    case "forward":
      pose = translate(state.pose, [0, 0, state.speed]);
      break;
    case "back":
      pose = translate(state.pose, [0, 0, -state.speed]);
      break;
    case "strafe_left":
      pose = translate(state.pose, [-state.speed, 0, 0]);
      break;
    case "strafe_right":
      pose = translate(state.pose, [state.speed, 0, 0]);
      break;
    case "yaw":
      pose = yaw(state.pose, input.amount * state.turnSpeed);
      break;
    case "pitch":
      pose = pitch(state.pose, input.amount * state.turnSpeed);
      break;
  }
  const trajectory = [...state.trajectory, clonePose(pose)];
  if (trajectory.length > RING_CAPACITY) trajectory.splice(0, trajectory.length - RING_CAPACITY);
  return { ...state, pose, trajectory };
}

/** Downsample the walked trajectory to at most REFINE_MAX_POSES for a job. */
export function refineTrajectory(state: ViewerState): Pose[] {
  const poses = state.trajectory;
  if (poses.length <= REFINE_MAX_POSES) return poses.map(clonePose);
  const picked: Pose[] = [];
  const stride = (poses.length - 1) / (REFINE_MAX_POSES - 1);
  for (let i = 0; i < REFINE_MAX_POSES; i++) {
    picked.push(clonePose(poses[Math.round(i * stride)]));
  }
  return picked;
}
