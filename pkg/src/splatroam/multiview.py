"""Fan-view clips, the stitch/split protocol, and occlusion masks.

A clip holds T time steps x K fan views. Stitching lays the K views of
each time step side by side (ascending yaw offset, left to right) into one
wide frame so a restorer sees every view of a moment jointly; splitting is
the exact inverse. Masks mark degraded/unknown pixels with 1 and ride
along through both directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, Pose, ViewFan, fan_poses
from .rendering import FrameBuffer, RasterSettings, DEFAULT_SETTINGS, render
from .scene import SplatScene

DEFAULT_FAN_N = 1
DEFAULT_FAN_DELTA = math.radians(30.0)
DEFAULT_TAU_ALPHA = 0.5


@dataclass
class MultiViewClip:
    """T x K frame buffers stacked as arrays, plus the fan geometry that shot them."""

    color: np.ndarray  # (T, K, H, W, 3)
    depth: np.ndarray  # (T, K, H, W)
    alpha: np.ndarray  # (T, K, H, W)
    n: int
    delta_theta: float
    path: tuple[Pose, ...]
    intrinsics: CameraIntrinsics | None = None

    def __post_init__(self):
        t, k = self.color.shape[:2]
        if k != 2 * self.n + 1:
            raise ValueError(f"clip has {k} views but fan n={self.n} implies {2*self.n+1}")
        if len(self.path) != t:
            raise ValueError(f"clip has {t} steps but path has {len(self.path)} poses")

    @property
    def steps(self) -> int:
        return self.color.shape[0]

    @property
    def views(self) -> int:
        return self.color.shape[1]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.color.shape[2], self.color.shape[3]

    def frame(self, t: int, k: int) -> FrameBuffer:
        return FrameBuffer(color=self.color[t, k], depth=self.depth[t, k], alpha=self.alpha[t, k])

    def fan_at(self, t: int) -> ViewFan:
        return fan_poses(self.path[t], self.n, self.delta_theta)

    def view_offsets(self) -> np.ndarray:
        return (np.arange(self.views) - self.n) * self.delta_theta


@dataclass
class UnifiedClip:
    """T stitched frames of width K*W with a matching 0/1 mask plane."""

    color: np.ndarray  # (T, H, K*W, 3)
    mask: np.ndarray  # (T, H, K*W) uint8, 1 = degraded/unknown
    k: int
    provenance: str = ""

    def __post_init__(self):
        if self.color.shape[2] % self.k != 0:
            raise ValueError(f"unified width {self.color.shape[2]} not divisible by K={self.k}")
        if self.mask.shape != self.color.shape[:3]:
            raise ValueError(f"mask shape {self.mask.shape} != frame shape {self.color.shape[:3]}")

    @property
    def steps(self) -> int:
        return self.color.shape[0]

    @property
    def view_width(self) -> int:
        return self.color.shape[2] // self.k


def render_fan_clip(scene: SplatScene, intr: CameraIntrinsics, path: list[Pose],
                    n: int = DEFAULT_FAN_N, delta_theta: float = DEFAULT_FAN_DELTA,
                    settings: RasterSettings = DEFAULT_SETTINGS) -> MultiViewClip:
    """Render the K = 2n+1 fan views at every pose along the path."""
    if len(path) < 1:
        raise ValueError("path must contain at least one pose")
    k = 2 * n + 1
    t_steps = len(path)
    color = np.zeros((t_steps, k, intr.height, intr.width, 3))
    depth = np.zeros((t_steps, k, intr.height, intr.width))
    alpha = np.zeros((t_steps, k, intr.height, intr.width))
    for t, pose in enumerate(path):
        fan = fan_poses(pose, n, delta_theta)
        for j, view_pose in enumerate(fan.poses):
            fb = render(scene, intr, view_pose, settings)
            color[t, j] = fb.color
            depth[t, j] = fb.depth
            alpha[t, j] = fb.alpha
    return MultiViewClip(color=color, depth=depth, alpha=alpha, n=n,
                         delta_theta=delta_theta, path=tuple(path), intrinsics=intr)


def stitch(clip: MultiViewClip, masks: np.ndarray | None = None,
           provenance: str = "") -> UnifiedClip:
    """Concatenate the K views of each step horizontally, ascending yaw offset.

    `masks` is (T, K, H, W) with 1 marking degraded pixels; omitted masks
    default to all-trusted.
    """
    t, k, h, w = clip.color.shape[:4]
    color = np.ascontiguousarray(np.moveaxis(clip.color, 1, 2)).reshape(t, h, k * w, 3)
    if masks is None:
        mask = np.zeros((t, h, k * w), dtype=np.uint8)
    else:
        masks = np.asarray(masks)
        if masks.shape != (t, k, h, w):
            raise ValueError(f"mask stack shape {masks.shape} != clip shape {(t, k, h, w)}")
        mask = np.ascontiguousarray(np.moveaxis(masks.astype(np.uint8), 1, 2)).reshape(t, h, k * w)
    return UnifiedClip(color=color, mask=mask, k=k, provenance=provenance)


def unstitch(unified: UnifiedClip) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of stitch: (T,K,H,W,3) colors and (T,K,H,W) masks."""
    t, h, kw = unified.color.shape[:3]
    if kw % unified.k != 0:
        raise ValueError(f"unified width {kw} not divisible by K={unified.k}")
    w = kw // unified.k
    color = np.moveaxis(unified.color.reshape(t, h, unified.k, w, 3), 2, 1).copy()
    mask = np.moveaxis(unified.mask.reshape(t, h, unified.k, w), 2, 1).copy()
    return color, mask


def coverage_mask(fb: FrameBuffer, tau_alpha: float = DEFAULT_TAU_ALPHA) -> np.ndarray:
    """1 where accumulated alpha falls below tau (uncovered or thin), else 0."""
    if not (0.0 < tau_alpha < 1.0):
        raise ValueError(f"tau_alpha must lie in (0, 1), got {tau_alpha}")
    return (fb.alpha < tau_alpha).astype(np.uint8)


def clip_coverage_masks(clip: MultiViewClip, tau_alpha: float = DEFAULT_TAU_ALPHA) -> np.ndarray:
    if not (0.0 < tau_alpha < 1.0):
        raise ValueError(f"tau_alpha must lie in (0, 1), got {tau_alpha}")
    return (clip.alpha < tau_alpha).astype(np.uint8)


def synth_masks(shape: tuple[int, int], seed: int, count: int,
                size_range: tuple[float, float] = (0.005, 0.04)) -> np.ndarray:
    """Union of random rectangles and ellipses simulating occluders.

    Each shape covers a fraction of the frame drawn from size_range and is
    placed fully inside the frame. Rectangles hit their target pixel count
    exactly; ellipse axes are rescaled once against their rasterized count,
    which lands within a few percent.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    h, w = shape
    mask = np.zeros((h, w), dtype=np.uint8)
    if count == 0:
        return mask
    lo, hi = size_range
    if not (0 < lo <= hi <= 1):
        raise ValueError(f"size_range must satisfy 0 < lo <= hi <= 1, got {size_range}")
    rng = np.random.default_rng(seed)
    for _ in range(count):
        frac = rng.uniform(lo, hi)
        area = frac * h * w
        if rng.uniform() < 0.5:
            aspect = rng.uniform(0.5, 2.0)
            rw = int(np.clip(round(math.sqrt(area * aspect)), 1, w))
            rh = int(np.clip(max(1, round(area / rw)), 1, h))
            rw = int(np.clip(round(area / rh), 1, w))
            y0 = int(rng.integers(0, h - rh + 1))
            x0 = int(rng.integers(0, w - rw + 1))
            mask[y0:y0 + rh, x0:x0 + rw] = 1
        else:
            aspect = rng.uniform(0.5, 2.0)
            a = math.sqrt(area * aspect / math.pi)
            b = area / (math.pi * a)
            a, b = min(a, w / 2 - 1), min(b, h / 2 - 1)
            a, b = max(a, 0.6), max(b, 0.6)
            cx = rng.uniform(a, w - a)
            cy = rng.uniform(b, h - b)
            yy, xx = np.mgrid[0:h, 0:w]
            ell = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
            got = int(ell.sum())
            if got > 0:
                s = math.sqrt(area / got)
                a2, b2 = min(a * s, w / 2 - 0.5), min(b * s, h / 2 - 0.5)
                ell = ((xx - cx) / max(a2, 0.6)) ** 2 + ((yy - cy) / max(b2, 0.6)) ** 2 <= 1.0
            mask[ell] = 1
    return mask


def apply_mask(frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out masked pixels (sentinel fill); trusted pixels pass through."""
    frame = np.asarray(frame)
    mask = np.asarray(mask)
    if mask.shape != frame.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} != frame shape {frame.shape[:2]}")
    out = frame.copy()
    out[mask.astype(bool)] = 0.0
    return out
