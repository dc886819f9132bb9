"""Scene optimization: coarse fits from sparse views and the iterative
render-restore-refine loop that improves a world along exploration paths.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .geometry import (CameraIntrinsics, Pose, TrajectorySpec, expand_trajectory,
                       fan_poses, make_trajectory, unproject)
from .metrics import cross_view_consistency, psnr
from .multiview import (DEFAULT_FAN_DELTA, DEFAULT_FAN_N, MultiViewClip,
                        clip_coverage_masks, render_fan_clip, unstitch)
from .rendering import (DEFAULT_SETTINGS, RasterSettings, SplatGradients,
                        backward, render)
from .restorer import make_restore_input, restore, restore_per_view
from .scene import (LOG_SCALE_MAX, LOG_SCALE_MIN, SceneMeta, SplatScene,
                    logit, save_scene)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# clamp strictly inside the representable scale range so f32 checkpoints stay valid
_SCALE_LO = LOG_SCALE_MIN + 1e-3
_SCALE_HI = LOG_SCALE_MAX - 1e-3


class TrainingError(RuntimeError):
    def __init__(self, message: str, step: int | None = None, view: int | None = None):
        detail = message
        if step is not None:
            detail += f" (step {step})"
        if view is not None:
            detail += f" (view {view})"
        super().__init__(detail)
        self.step = step
        self.view = view


@dataclass(frozen=True)
class LearningRates:
    """Per parameter class; `center` is multiplied by the scene extent."""

    center: float = 1.6e-3
    log_scale: float = 5e-3
    quaternion: float = 1e-3
    color: float = 2.5e-2
    opacity: float = 5e-2


@dataclass
class OptimizerState:
    """Adam moments per scene parameter plus the effective learning rates."""

    m: SplatGradients
    v: SplatGradients
    step: int
    lr_center: float
    lr_log_scale: float
    lr_quaternion: float
    lr_color: float
    lr_opacity: float

    @classmethod
    def fresh(cls, n: int, lrs: LearningRates = LearningRates(), extent: float = 10.0) -> "OptimizerState":
        return cls(
            m=SplatGradients.zeros(n),
            v=SplatGradients.zeros(n),
            step=0,
            lr_center=lrs.center * extent,
            lr_log_scale=lrs.log_scale,
            lr_quaternion=lrs.quaternion,
            lr_color=lrs.color,
            lr_opacity=lrs.opacity,
        )


def optimize_step(scene: SplatScene, supervision: list, intr: CameraIntrinsics,
                  state: OptimizerState,
                  settings: RasterSettings = DEFAULT_SETTINGS) -> tuple[SplatScene, OptimizerState, float]:
    """One Adam step on the weighted sum of per-view photometric losses.

    `supervision` items are (pose, image, mask, weight); gradients accumulate
    in list order. Quaternions renormalize and log scales clamp after the
    update. Mutates `scene` and `state` in place and returns them.
    """
    if not supervision:
        raise ValueError("supervision list is empty")
    n = scene.num_splats
    total = SplatGradients.zeros(n)
    loss_sum = 0.0
    for view_idx, (pose, image, mask, weight) in enumerate(supervision):
        loss, grads = backward(scene, intr, pose, image, mask, settings)
        if not math.isfinite(loss):
            raise TrainingError("non-finite photometric loss", step=state.step, view=view_idx)
        loss_sum += weight * loss
        total.add_scaled(grads, weight)

    state.step += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.step
    bc2 = 1.0 - ADAM_BETA2 ** state.step

    def adam(param, g, m, v, lr):
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * g * g
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)

    adam(scene.centers, total.centers, state.m.centers, state.v.centers, state.lr_center)
    adam(scene.log_scales, total.log_scales, state.m.log_scales, state.v.log_scales, state.lr_log_scale)
    adam(scene.quaternions, total.quaternions, state.m.quaternions, state.v.quaternions, state.lr_quaternion)
    adam(scene.colors, total.colors, state.m.colors, state.v.colors, state.lr_color)
    adam(scene.opacity_logits, total.opacity_logits, state.m.opacity_logits, state.v.opacity_logits, state.lr_opacity)

    np.clip(scene.log_scales, _SCALE_LO, _SCALE_HI, out=scene.log_scales)
    np.clip(scene.colors, 0.0, 1.0, out=scene.colors)
    norms = np.linalg.norm(scene.quaternions, axis=1, keepdims=True)
    np.divide(scene.quaternions, norms, out=scene.quaternions, where=norms > 0)
    return scene, state, loss_sum


def _round_robin(n_views: int, batch_size: int, step: int) -> list[int]:
    if batch_size >= n_views:
        return list(range(n_views))
    start = (step * batch_size) % n_views
    return [(start + i) % n_views for i in range(batch_size)]


def init_scene_from_views(gt_views: list, intr: CameraIntrinsics, seed: int,
                          bounds: np.ndarray, n_splats: int = 600,
                          background: np.ndarray | None = None,
                          init_opacity: float = 0.1) -> SplatScene:
    """Seed a scene by backprojecting random supervision pixels to random depths.

    `init_opacity` sets how confidently the random-depth splats render before
    training: low values give soft washes, higher ones sharp misplaced
    content (ghosting), which is what the dataset pipeline wants its early
    checkpoints to exhibit.
    """
    if not gt_views:
        raise ValueError("need at least one supervision view")
    rng = np.random.default_rng(seed)
    bounds = np.asarray(bounds, dtype=np.float64).reshape(2, 3)
    diag = float(np.linalg.norm(bounds[1] - bounds[0]))
    depth_max = diag

    centers = np.empty((n_splats, 3))
    colors = np.empty((n_splats, 3))
    for i in range(n_splats):
        view = int(rng.integers(len(gt_views)))
        pose, image = gt_views[view][0], gt_views[view][1]
        py = int(rng.integers(intr.height))
        px = int(rng.integers(intr.width))
        depth = float(rng.uniform(0.5, depth_max))
        p_cam = unproject(intr, float(px), float(py), depth)
        centers[i] = pose.camera_to_world(p_cam)
        colors[i] = image[py, px]
    centers = np.clip(centers, bounds[0], bounds[1])

    # small enough that unsupervised regions stay visibly uncovered in the
    # coarse world; splats grow where supervision wants them to
    scale0 = math.log(max(1e-3, 0.11 * diag / n_splats ** (1.0 / 3.0)))
    if background is None:
        background = np.full(3, 0.5)
    return SplatScene(
        centers=centers,
        log_scales=np.full((n_splats, 3), scale0),
        quaternions=np.tile([1.0, 0.0, 0.0, 0.0], (n_splats, 1)),
        colors=colors,
        opacity_logits=np.full(n_splats, logit(init_opacity)),
        bounds=bounds,
        background=np.asarray(background, dtype=np.float64),
        meta=SceneMeta("coarse", seed),
    )


def fit_coarse(gt_views: list, intr: CameraIntrinsics, steps: int, seed: int,
               bounds: np.ndarray, n_splats: int = 600,
               background: np.ndarray | None = None,
               lrs: LearningRates = LearningRates(), batch_size: int = 8,
               settings: RasterSettings = DEFAULT_SETTINGS,
               snapshot_steps: list[int] | None = None,
               init_opacity: float = 0.1) -> SplatScene | tuple[SplatScene, list[SplatScene]]:
    """Fit a coarse world to sparse (pose, image) views from a seeded init.

    With `snapshot_steps`, also returns f32-quantized copies captured after
    those step counts (used by the dataset pipeline for under-trained
    checkpoints). Deterministic for fixed inputs and seed.
    """
    scene = init_scene_from_views(gt_views, intr, seed, bounds, n_splats, background,
                                  init_opacity=init_opacity)
    extent = float(np.linalg.norm(scene.bounds[1] - scene.bounds[0]))
    state = OptimizerState.fresh(scene.num_splats, lrs, extent)
    full_mask = np.ones((intr.height, intr.width), dtype=bool)
    views = [(pose, np.asarray(img, dtype=np.float64), full_mask, 1.0) for pose, img in gt_views]

    snaps: dict[int, SplatScene] = {}
    want = sorted(set(snapshot_steps or []))
    if 0 in want:
        snaps[0] = scene.copy("checkpoint").quantized()
    for step in range(1, steps + 1):
        batch = [views[i] for i in _round_robin(len(views), batch_size, step - 1)]
        scene, state, _ = optimize_step(scene, batch, intr, state, settings)
        if step in want:
            snaps[step] = scene.copy("checkpoint").quantized()
    scene.meta = SceneMeta("coarse", seed)
    if snapshot_steps is None:
        return scene
    return scene, [snaps[s] for s in want]


@dataclass(frozen=True)
class StopRule:
    min_psnr_gain: float = 0.1
    patience: int = 2


@dataclass
class RefineConfig:
    """Configuration of the iterative refinement loop."""

    max_outer_iters: int = 3
    inner_steps: int = 300
    trajectories: list[TrajectorySpec] = field(default_factory=list)
    fan_n: int = DEFAULT_FAN_N
    fan_delta: float = DEFAULT_FAN_DELTA
    restorer_kind: str = "reproject"
    stop: StopRule = field(default_factory=StopRule)
    anchor_weight: float = 1.0
    tau_alpha: float = 0.5
    soft_blend: float = 0.5
    batch_size: int = 8
    joint_restore: bool = True
    densify: bool = False
    lrs: LearningRates = field(default_factory=LearningRates)

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.anchor_weight < 0:
            raise ValueError(f"anchor_weight must be >= 0, got {self.anchor_weight}")


def should_stop(history: list[float], config: RefineConfig) -> bool:
    """True once max iterations ran or the last `patience` gains all fell short."""
    if len(history) >= config.max_outer_iters:
        return True
    gains = [history[i + 1] - history[i] for i in range(len(history) - 1)]
    p = config.stop.patience
    if p > 0 and len(gains) >= p:
        recent = gains[-p:]
        if all(g < config.stop.min_psnr_gain for g in recent):
            return True
    return False


@dataclass
class IterationRecord:
    iteration: int
    loss: float
    heldout_psnr: float
    anchor_psnr: float
    consistency: float
    filled_pixels: int
    supervision_views: int
    splats: int

    def to_json(self) -> str:
        d = asdict(self)
        if math.isnan(d["consistency"]):
            d["consistency"] = None
        return json.dumps(d, sort_keys=True)


def _mean_view_psnr(scene: SplatScene, views: list, intr: CameraIntrinsics,
                    settings: RasterSettings) -> float:
    vals = [psnr(render(scene, intr, pose, settings).color, img) for pose, img in views]
    return float(np.mean(vals)) if vals else float("nan")


def refine_loop(coarse: SplatScene, anchor_views: list, config: RefineConfig,
                intr: CameraIntrinsics, heldout_views: list | None = None,
                gt_scene: SplatScene | None = None, out_dir=None,
                settings: RasterSettings = DEFAULT_SETTINGS,
                on_iteration=None) -> tuple[SplatScene, list[IterationRecord]]:
    """Iteratively render exploration clips, restore them, and refit the world.

    Per outer iteration: every configured trajectory is rendered as a fan
    clip, coverage-masked, stitched, restored (jointly by default; per view
    for the ablation), split back, and appended to the supervision set with
    weight 1 next to the anchors (weight `anchor_weight`). The stopping
    metric is held-out PSNR when `heldout_views` are given, anchor PSNR
    otherwise. The oracle restorer requires `gt_scene`.
    """
    if config.restorer_kind == "oracle" and gt_scene is None:
        raise ValueError("oracle restorer needs the ground-truth scene to peek at")
    if not config.trajectories:
        raise ValueError("refine loop needs at least one trajectory")

    scene = coarse.copy("refined")
    extent = float(np.linalg.norm(scene.bounds[1] - scene.bounds[0]))
    scene_extent = float(np.max(scene.bounds[1] - scene.bounds[0]))
    anchors = [(pose, np.asarray(img, dtype=np.float64)) for pose, img in anchor_views]
    eval_views = heldout_views if heldout_views else anchors

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    records: list[IterationRecord] = []
    psnr_history: list[float] = []
    full_mask = np.ones((intr.height, intr.width), dtype=bool)

    for iteration in range(config.max_outer_iters):
        supervision = [(p, img, full_mask, config.anchor_weight) for p, img in anchors]
        filled_total = 0
        last_clip: MultiViewClip | None = None
        for spec in config.trajectories:
            path = expand_trajectory(spec)
            clip = render_fan_clip(scene, intr, path, config.fan_n, config.fan_delta, settings)
            masks = clip_coverage_masks(clip, config.tau_alpha)
            rinput = make_restore_input(clip, masks, scene_extent=scene_extent,
                                        tau_alpha=config.tau_alpha, soft_blend=config.soft_blend)
            gt_clip = None
            if config.restorer_kind == "oracle":
                gt_clip = render_fan_clip(gt_scene, intr, path, config.fan_n, config.fan_delta, settings).color
            restore_fn = restore if config.joint_restore else restore_per_view
            result = restore_fn(rinput, config.restorer_kind, gt_clip)
            filled_total += int(sum(result.stats.filled_per_frame))
            restored_colors, _ = unstitch(result.unified_restored)
            for t, pose in enumerate(path):
                fan = fan_poses(pose, config.fan_n, config.fan_delta)
                for k, view_pose in enumerate(fan.poses):
                    supervision.append((view_pose, restored_colors[t, k], full_mask, 1.0))
            last_clip = clip

        if config.densify and last_clip is not None:
            scene = densify_from_holes(scene, last_clip, intr, config.tau_alpha)

        # anchors ride in every batch (drift guard); restored views round-robin
        n_anchor = len(anchors)
        restored_part = supervision[n_anchor:]
        state = OptimizerState.fresh(scene.num_splats, config.lrs, extent)
        loss = float("nan")
        for step in range(config.inner_steps):
            batch = list(supervision[:n_anchor])
            if restored_part:
                batch += [restored_part[i] for i in _round_robin(len(restored_part), config.batch_size, step)]
            scene, state, loss = optimize_step(scene, batch, intr, state, settings)

        heldout_psnr = _mean_view_psnr(scene, eval_views, intr, settings)
        anchor_psnr = _mean_view_psnr(scene, anchors, intr, settings)
        eval_path = expand_trajectory(config.trajectories[0])[::4]
        eval_clip = render_fan_clip(scene, intr, eval_path, config.fan_n, config.fan_delta, settings)
        consistency = cross_view_consistency(eval_clip) if eval_clip.views >= 2 else float("nan")

        records.append(IterationRecord(
            iteration=iteration,
            loss=loss,
            heldout_psnr=heldout_psnr,
            anchor_psnr=anchor_psnr,
            consistency=consistency,
            filled_pixels=filled_total,
            supervision_views=len(supervision),
            splats=scene.num_splats,
        ))
        psnr_history.append(heldout_psnr)

        if out_path is not None:
            save_scene(scene.quantized("refined"), out_path / f"scene_iter_{iteration:03d}.wfsc")
            with open(out_path / "report.jsonl", "a") as f:
                f.write(records[-1].to_json() + "\n")
        if on_iteration is not None:
            on_iteration(scene.copy("refined"), records[-1])

        if should_stop(psnr_history, config):
            break

    scene.meta = SceneMeta("refined", scene.meta.seed)
    return scene, records


def densify_from_holes(scene: SplatScene, clip: MultiViewClip, intr: CameraIntrinsics,
                       tau_alpha: float = 0.5, tau_trust: float = 0.9,
                       min_region: int = 12, max_new: int = 64) -> SplatScene:
    """Spawn one splat per connected hole still uncovered in >= 2 fan views.

    Each spawned splat sits at the median depth of the hole's trusted
    boundary pixels, colored like that boundary, sized to the hole extent.
    """
    from scipy import ndimage

    new_centers, new_scales, new_colors = [], [], []
    for t in range(clip.steps):
        fan = clip.fan_at(t)
        for k in range(clip.views):
            if len(new_centers) >= max_new:
                break
            holes = clip.alpha[t, k] < tau_alpha
            labels, count = ndimage.label(holes)
            for lab in range(1, count + 1):
                region = labels == lab
                if int(region.sum()) < min_region:
                    continue
                # search a few pixels out: the rim of a hole ramps through
                # soft alpha before reaching trustworthy surface
                ring = ndimage.binary_dilation(region, iterations=3) & ~region
                boundary = ring & (clip.alpha[t, k] >= tau_trust) & (clip.depth[t, k] > 0)
                if not boundary.any():
                    continue
                depth = float(np.median(clip.depth[t, k][boundary]))
                ys, xs = np.nonzero(region)
                cy, cx = float(ys.mean()), float(xs.mean())
                p_cam = unproject(intr, cx, cy, depth)
                world = fan.poses[k].camera_to_world(p_cam)

                # uncovered in at least one other view as well
                others = 0
                for j in range(clip.views):
                    if j == k:
                        continue
                    pc = fan.poses[j].world_to_camera(world)
                    if pc[2] <= 0.05:
                        continue
                    u = int(round(intr.fx * pc[0] / pc[2] + intr.cx))
                    v = int(round(intr.fy * pc[1] / pc[2] + intr.cy))
                    if 0 <= u < intr.width and 0 <= v < intr.height and clip.alpha[t, j][v, u] < tau_alpha:
                        others += 1
                if others == 0:
                    continue
                radius_px = math.sqrt(region.sum() / math.pi)
                size = max(1e-3, radius_px * depth / intr.fx)
                new_centers.append(world)
                new_scales.append(np.log([size, size, size * 0.25]))
                new_colors.append(clip.color[t, k][boundary].mean(axis=0))
                if len(new_centers) >= max_new:
                    break

    if not new_centers:
        return scene
    n_new = len(new_centers)
    return SplatScene(
        centers=np.concatenate([scene.centers, np.asarray(new_centers)]),
        log_scales=np.concatenate([scene.log_scales, np.asarray(new_scales)]),
        quaternions=np.concatenate([scene.quaternions, np.tile([1.0, 0, 0, 0], (n_new, 1))]),
        colors=np.concatenate([scene.colors, np.clip(np.asarray(new_colors), 0, 1)]),
        opacity_logits=np.concatenate([scene.opacity_logits, np.full(n_new, logit(0.5))]),
        bounds=scene.bounds,
        background=scene.background,
        meta=scene.meta,
    )
