"""Quality proxies: PSNR, SSIM, cross-view consistency, hole ratio, and reports."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .geometry import CameraIntrinsics, Pose, TrajectorySpec, make_trajectory
from .multiview import MultiViewClip, render_fan_clip
from .rendering import FrameBuffer, render
from .scene import SplatScene
from .warp import backward_warp_sample

PSNR_CAP_DB = 99.0
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

DEFAULT_HOLDOUT_INTERVAL = 4


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images, capped at 99."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img @ LUMA_WEIGHTS
    return img


def _conv_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, win.shape)
    return np.einsum("hwij,ij->hw", view, win)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity on luminance, 11x11 Gaussian window, dynamic range 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    ia, ib = _luminance(a), _luminance(b)
    if ia.shape[0] < SSIM_WINDOW or ia.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image {ia.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu1 = _conv_valid(ia, win)
    mu2 = _conv_valid(ib, win)
    s11 = _conv_valid(ia * ia, win) - mu1 * mu1
    s22 = _conv_valid(ib * ib, win) - mu2 * mu2
    s12 = _conv_valid(ia * ib, win) - mu1 * mu2
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def hole_ratio(fb: FrameBuffer, tau: float = 0.5) -> float:
    """Fraction of pixels whose accumulated alpha falls below tau."""
    return float(np.mean(fb.alpha < tau))


def cross_view_consistency(clip: MultiViewClip, delta_d: float | None = None,
                           near: float = 0.05,
                           geometry: MultiViewClip | None = None) -> float:
    """Mean absolute color error between adjacent fan views after depth warping.

    Each view's right neighbor is resampled into it (bilinear, through the
    neighbor's own depth) with a depth-agreement occlusion test; pixels that
    land outside the neighbor, on uncovered regions, or on disagreeing depth
    are excluded. Returns NaN when no pixel anywhere survives (e.g.
    zero-overlap fans).

    `geometry` optionally supplies the depth/alpha planes to warp through
    (e.g. ground-truth geometry on a synthetic benchmark), so the metric
    scores the color content of `clip` with the warp geometry factored out.
    """
    if clip.views < 2:
        raise ValueError("consistency needs at least two views per step")
    if clip.intrinsics is None:
        raise ValueError("clip carries no intrinsics")
    intr = clip.intrinsics
    geo = geometry if geometry is not None else clip
    if geo.depth.shape != clip.depth.shape:
        raise ValueError("geometry clip shape does not match")
    if delta_d is None:
        covered = geo.depth[geo.depth > 0]
        delta_d = 0.02 * float(covered.mean()) if covered.size else 0.0

    errors = []
    for t in range(clip.steps):
        fan = clip.fan_at(t)
        for k in range(clip.views - 1):
            src_valid = geo.alpha[t, k] >= 0.5
            dst_valid = geo.alpha[t, k + 1] >= 0.5
            sampled, valid = backward_warp_sample(
                clip.color[t, k], geo.depth[t, k], src_valid,
                geo.depth[t, k + 1], dst_valid,
                fan.poses[k], fan.poses[k + 1], intr, delta_d, near=near)
            if valid.any():
                diff = np.abs(sampled[valid] - clip.color[t, k + 1][valid])
                errors.append(diff.mean())
    if not errors:
        return float("nan")
    return float(np.mean(errors))


@dataclass
class EvalRow:
    world_id: str
    scene_id: str
    psnr: float
    ssim: float
    consistency: float
    hole_ratio: float


@dataclass
class EvalReport:
    """Rows of per-(world, scene) metrics plus the evaluation configuration."""

    rows: list[EvalRow] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def scene_ids(self) -> list[str]:
        return sorted({r.scene_id for r in self.rows})

    def world_ids(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.world_id not in seen:
                seen.append(r.world_id)
        return seen

    def aggregate(self) -> dict[str, dict[str, float]]:
        """Mean metrics per world over scenes; NaN consistency rows are skipped."""
        out: dict[str, dict[str, float]] = {}
        for wid in self.world_ids():
            rows = [r for r in self.rows if r.world_id == wid]
            cons = [r.consistency for r in rows if not math.isnan(r.consistency)]
            out[wid] = {
                "psnr": float(np.mean([r.psnr for r in rows])),
                "ssim": float(np.mean([r.ssim for r in rows])),
                "consistency": float(np.mean(cons)) if cons else float("nan"),
                "hole_ratio": float(np.mean([r.hole_ratio for r in rows])),
            }
        return out

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "aggregate": self.aggregate(),
            "scene_ids": self.scene_ids(),
        }
        return json.dumps(_nan_to_none(payload), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        rows = [EvalRow(**{**r, "consistency": _none_to_nan(r["consistency"])}) for r in data["rows"]]
        return cls(rows=rows, config=data.get("config", {}))

    def format_table(self) -> str:
        agg = self.aggregate()
        headers = ["method", "psnr(dB)", "ssim", "consistency", "hole_ratio"]
        lines = []
        for wid, m in agg.items():
            cons = "undefined" if math.isnan(m["consistency"]) else f"{m['consistency']:.4f}"
            lines.append([wid, f"{m['psnr']:.2f}", f"{m['ssim']:.4f}", cons, f"{m['hole_ratio']:.4f}"])
        widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h) for i, h in enumerate(headers)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*headers), fmt.format(*["-" * w for w in widths])]
        out += [fmt.format(*row) for row in lines]
        return "\n".join(out)


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _none_to_nan(v):
    return float("nan") if v is None else v


def holdout_poses(spec: TrajectorySpec, interval: int = DEFAULT_HOLDOUT_INTERVAL) -> list[Pose]:
    return make_trajectory(spec)[::interval]


def evaluate_worlds(gt_scene: SplatScene, worlds: list[tuple[str, SplatScene]],
                    trajectories: list[TrajectorySpec], intr: CameraIntrinsics,
                    fan_n: int = 1, fan_delta: float = math.radians(30.0),
                    holdout_interval: int = DEFAULT_HOLDOUT_INTERVAL,
                    scene_id: str = "scene", tau: float = 0.5) -> EvalReport:
    """Render held-out views on every trajectory from each world and score them.

    Held-out poses are every `holdout_interval`-th pose of each trajectory;
    PSNR/SSIM compare against ground-truth renders, consistency runs on each
    world's own fan clips, hole ratio on its buffers. Deterministic.
    """
    poses: list[Pose] = []
    for spec in trajectories:
        poses.extend(holdout_poses(spec, holdout_interval))

    gt_frames = [render(gt_scene, intr, p) for p in poses]
    report = EvalReport(config={
        "holdout_interval": holdout_interval,
        "fan_n": fan_n,
        "fan_delta_deg": math.degrees(fan_delta),
        "width": intr.width,
        "height": intr.height,
        "num_holdout_poses": len(poses),
        "trajectories": [s.kind for s in trajectories],
    })
    for world_id, world in worlds:
        psnrs, ssims, holes = [], [], []
        for p, gt_fb in zip(poses, gt_frames):
            fb = render(world, intr, p)
            psnrs.append(psnr(fb.color, gt_fb.color))
            ssims.append(ssim(fb.color, gt_fb.color))
            holes.append(hole_ratio(fb, tau))
        clip = render_fan_clip(world, intr, poses, n=fan_n, delta_theta=fan_delta)
        cons = cross_view_consistency(clip)
        report.rows.append(EvalRow(
            world_id=world_id,
            scene_id=scene_id,
            psnr=float(np.mean(psnrs)),
            ssim=float(np.mean(ssims)),
            consistency=cons,
            hole_ratio=float(np.mean(holes)),
        ))
    return report
