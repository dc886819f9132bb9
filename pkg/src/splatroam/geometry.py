"""Camera models, poses, exploration trajectories, and yawed view fans.

Conventions (used consistently everywhere in this package):

  World frame: right-handed, y is the vertical axis.
  Camera frame: x right, y down, z forward (points with z > 0 are in
    front of the camera). Poses are camera-to-world.
  The identity pose therefore looks along world +z; a pose "facing -z"
  carries a 180-degree yaw.

Yaw offsets for view fans are realized as right-multiplication by a
rotation about the vertical axis; negative offsets look left, so
ascending offsets read left-to-right in a stitched strip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

ORTHO_TOL = 1e-9

TRAJECTORY_KINDS = (
    "panoramic",
    "forward",
    "forward_left",
    "forward_right",
    "translate_left",
    "translate_right",
)


class NotVisibleError(ValueError):
    """Raised when a camera-space point lies at or behind the camera plane."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 8 or self.height < 8:
            raise ValueError(f"image size must be at least 8x8, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        """Square-pixel intrinsics from a horizontal field of view."""
        fx = width / (2.0 * math.tan(math.radians(fov_x_deg) / 2.0))
        return cls(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0, width=width, height=height)

    def fov_x_deg(self) -> float:
        return math.degrees(2.0 * math.atan(self.width / (2.0 * self.fx)))


@dataclass(frozen=True)
class Pose:
    """Camera-to-world pose: 3x3 rotation and camera center in world units."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("pose contains non-finite values")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > 1e-8:
            raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        if abs(np.linalg.det(r) - 1.0) > 1e-8:
            raise ValueError(f"rotation has det {np.linalg.det(r):.6f}, expected +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def facing(cls, yaw: float, center=(0.0, 0.0, 0.0)) -> "Pose":
        """Pose at `center` yawed by `yaw` radians from the +z look direction."""
        return cls(rot_y(yaw), np.asarray(center, dtype=np.float64))

    @property
    def forward(self) -> np.ndarray:
        """World-space view direction (camera +z axis)."""
        return self.rotation[:, 2].copy()

    @property
    def right(self) -> np.ndarray:
        """World-space camera +x axis."""
        return self.rotation[:, 0].copy()

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def yawed(self, theta: float) -> "Pose":
        """Pose rotated about the vertical axis by theta, same center."""
        return Pose(self.rotation @ rot_y(theta), self.translation)


@dataclass(frozen=True)
class Camera:
    """A pose plus its intrinsics; one capture viewpoint."""

    pose: Pose
    intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class TrajectorySpec:
    """Constant-step exploration path.

    `turn_rate` applies to the oblique kinds (radians per step); angles
    entering from external config are converted from degrees before
    constructing a spec.
    """

    kind: str
    steps: int
    step_length: float = 0.0
    turn_rate: float = 0.0
    start: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; expected one of {TRAJECTORY_KINDS}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        if self.step_length < 0:
            raise ValueError(f"step_length must be >= 0, got {self.step_length}")
        if self.kind == "panoramic" and self.step_length != 0:
            raise ValueError("panoramic trajectories require step_length = 0")


@dataclass(frozen=True)
class ViewFan:
    """K = 2n+1 poses sharing one center, yawed by (k - n) * delta_theta."""

    n: int
    delta_theta: float
    poses: tuple[Pose, ...]

    def __post_init__(self):
        if len(self.poses) != 2 * self.n + 1:
            raise ValueError(f"fan must hold 2n+1 poses, got {len(self.poses)} for n={self.n}")

    @property
    def k(self) -> int:
        return 2 * self.n + 1

    def offsets(self) -> np.ndarray:
        return fan_offsets(self.n, self.delta_theta)


def rot_y(theta: float) -> np.ndarray:
    """Rotation about the vertical axis: [[cos,0,sin],[0,1,0],[-sin,0,cos]]."""
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]], dtype=np.float64)


def fan_offsets(n: int, delta_theta: float) -> np.ndarray:
    """Yaw offsets (k - n) * delta_theta for k = 0..2n, ascending."""
    if n < 0:
        raise ValueError(f"fan half-width must be >= 0, got {n}")
    if delta_theta < 0:
        raise ValueError(f"angular step must be >= 0, got {delta_theta}")
    return (np.arange(2 * n + 1, dtype=np.float64) - n) * delta_theta


def fan_poses(forward: Pose, n: int, delta_theta: float) -> ViewFan:
    """Fan of yawed poses around `forward`; the center element is `forward` itself."""
    offsets = fan_offsets(n, delta_theta)
    poses = []
    for k, theta in enumerate(offsets):
        if k == n:
            poses.append(forward)
        else:
            poses.append(forward.yawed(float(theta)))
    return ViewFan(n=n, delta_theta=delta_theta, poses=tuple(poses))


@dataclass(frozen=True)
class ExplicitPath:
    """A literal pose sequence (e.g. a walked trajectory captured by a client)."""

    poses: tuple[Pose, ...]

    def __post_init__(self):
        if len(self.poses) < 1:
            raise ValueError("explicit path needs at least one pose")


def expand_trajectory(spec) -> list[Pose]:
    """Poses of either a TrajectorySpec or an ExplicitPath."""
    if isinstance(spec, ExplicitPath):
        return list(spec.poses)
    return make_trajectory(spec)


def make_trajectory(spec: TrajectorySpec) -> list[Pose]:
    """Expand a trajectory spec into its list of poses.

    forward: march along the start pose's forward axis, rotation fixed.
    forward_left / forward_right: yaw accumulates by -/+ turn_rate per step
      and the camera advances along the current forward axis (an arc).
    translate_left / translate_right: strafe along the lateral axis.
    panoramic: fixed center, yaw sweeping 2*pi uniformly over the steps.
    """
    start = spec.start
    poses: list[Pose] = []
    if spec.kind == "panoramic":
        for t in range(spec.steps):
            poses.append(start.yawed(2.0 * math.pi * t / spec.steps))
        return poses

    if spec.kind == "forward":
        step_vec = start.forward * spec.step_length
        for t in range(spec.steps):
            poses.append(Pose(start.rotation, start.translation + t * step_vec))
        return poses

    if spec.kind in ("forward_left", "forward_right"):
        sign = -1.0 if spec.kind == "forward_left" else 1.0
        center = start.translation.copy()
        poses.append(start)
        for t in range(1, spec.steps):
            p = start.yawed(sign * spec.turn_rate * t)
            center = center + p.forward * spec.step_length
            poses.append(Pose(p.rotation, center))
        return poses

    # translate_left / translate_right
    sign = -1.0 if spec.kind == "translate_left" else 1.0
    step_vec = start.right * (sign * spec.step_length)
    for t in range(spec.steps):
        poses.append(Pose(start.rotation, start.translation + t * step_vec))
    return poses


def project(intr: CameraIntrinsics, p_cam: np.ndarray) -> tuple[float, float, float]:
    """Pinhole projection of one camera-space point to (u, v, depth)."""
    x, y, z = float(p_cam[0]), float(p_cam[1]), float(p_cam[2])
    if z <= 0:
        raise NotVisibleError(f"point at camera depth {z} is not visible")
    return (intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy, z)


def unproject(intr: CameraIntrinsics, u, v, depth) -> np.ndarray:
    """Inverse of `project`: pixel coordinates plus depth to camera-space points.

    Accepts scalars or arrays; returns shape (..., 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (u - intr.cx) / intr.fx * depth
    y = (v - intr.cy) / intr.fy * depth
    return np.stack(np.broadcast_arrays(x, y, depth), axis=-1)


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrices from (w, x, y, z) quaternions, normalized first.

    Accepts shape (4,) or (N, 4); returns (3, 3) or (N, 3, 3).
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    norm = np.linalg.norm(q, axis=1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("zero quaternion has no orientation")
    w, x, y, z = (q / norm).T
    r = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    r[:, 0, 0] = 1 - 2 * (y * y + z * z)
    r[:, 0, 1] = 2 * (x * y - w * z)
    r[:, 0, 2] = 2 * (x * z + w * y)
    r[:, 1, 0] = 2 * (x * y + w * z)
    r[:, 1, 1] = 1 - 2 * (x * x + z * z)
    r[:, 1, 2] = 2 * (y * z - w * x)
    r[:, 2, 0] = 2 * (x * z - w * y)
    r[:, 2, 1] = 2 * (y * z + w * x)
    r[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return r[0] if single else r


def rot_to_quat(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix; w >= 0."""
    r = np.asarray(r, dtype=np.float64)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def pose_to_wire(pose: Pose) -> dict:
    """JSON-friendly pose: quaternion (w, x, y, z) plus translation."""
    return {
        "quaternion": [float(v) for v in rot_to_quat(pose.rotation)],
        "translation": [float(v) for v in pose.translation],
    }


def pose_from_wire(data: dict) -> Pose:
    q = np.asarray(data["quaternion"], dtype=np.float64)
    t = np.asarray(data["translation"], dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    if t.shape != (3,):
        raise ValueError(f"translation must have 3 components, got shape {t.shape}")
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-6:
        raise ValueError("quaternion is degenerate")
    return Pose(quat_to_rot(q), t)


def trajectory_spec_from_dict(data: dict) -> TrajectorySpec:
    """Build a spec from external config; angles arrive in degrees."""
    kind = data["kind"]
    steps = int(data["steps"])
    step_length = float(data.get("step_length", 0.0))
    turn_rate = math.radians(float(data.get("turn_rate_deg", 0.0)))
    if "start" in data:
        start = pose_from_wire(data["start"])
    else:
        start = Pose.identity()
    return TrajectorySpec(kind=kind, steps=steps, step_length=step_length, turn_rate=turn_rate, start=start)
