"""Dataset construction: sparse fits with saved under-trained checkpoints,
degraded-clip rendering, pairing with ground truth, and the on-disk layout.

Layout: out_dir/manifest.json plus one directory per scene holding gt.wfsc,
checkpoint scenes, clip directories (numbered PNG frames, raw f32 depth
planes, mask PNGs), and pair.json describing cameras, checkpoint indices,
and segment boundaries.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import imgio
from .geometry import (Camera, CameraIntrinsics, Pose, TrajectorySpec,
                       fan_poses, make_trajectory, pose_from_wire, pose_to_wire)
from .multiview import DEFAULT_FAN_DELTA, DEFAULT_FAN_N, synth_masks
from .refine import LearningRates, TrainingError, fit_coarse
from .rendering import DEFAULT_SETTINGS, RasterSettings, render
from .scene import SceneGenConfig, SplatScene, generate_scene, load_scene, save_scene

STYLE_TAGS = ("synth_style", "real_style")


@dataclass
class CheckpointSet:
    """Under-trained snapshots of one sparse fit, orderd by training step."""

    models: list[SplatScene]
    epochs: list[int]
    seed: int

    def __post_init__(self):
        if len(self.models) != len(self.epochs):
            raise ValueError("models and epochs differ in length")
        if not self.models:
            raise ValueError("checkpoint set is empty")
        if any(b <= a for a, b in zip(self.epochs, self.epochs[1:])):
            raise ValueError(f"epochs must be strictly increasing, got {self.epochs}")


@dataclass
class RenderedClip:
    """Frames rendered along a camera list: color (L,H,W,3), depth, alpha."""

    color: np.ndarray
    depth: np.ndarray
    alpha: np.ndarray

    def __len__(self) -> int:
        return self.color.shape[0]


@dataclass
class DegradedPair:
    """Aligned degraded/clean clips with cameras, masks, and segment metadata."""

    degraded: RenderedClip
    clean: np.ndarray  # (L, H, W, 3)
    cameras: list[Camera]
    checkpoint_index: int
    epochs: int
    segments: list[tuple[int, int]]
    masks: np.ndarray  # (L, H, W) uint8

    def __post_init__(self):
        l = len(self.degraded)
        if self.clean.shape[0] != l or len(self.cameras) != l or self.masks.shape[0] != l:
            raise ValueError("degraded, clean, cameras, and masks must share length")
        if self.clean.shape[1:] != self.degraded.color.shape[1:]:
            raise ValueError("degraded and clean frame sizes differ")


@dataclass(frozen=True)
class FitSchedule:
    total_steps: int = 200
    num_checkpoints: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.num_checkpoints < 1:
            raise ValueError("need at least one checkpoint")
        if self.total_steps < self.num_checkpoints:
            raise ValueError("total_steps must be >= num_checkpoints")


def select_sparse_frames(path: list[Pose], interval: int) -> list[tuple[int, Pose]]:
    """Every `interval`-th frame starting at index 0."""
    if interval < 1:
        raise ValueError(f"interval must be >= 1, got {interval}")
    return [(i, path[i]) for i in range(0, len(path), interval)]


def checkpoint_steps(schedule: FitSchedule) -> list[int]:
    """Snapshot step counts: the final step plus uniform draws below it.

    The last checkpoint is always the fully trained model; the remaining
    num_checkpoints - 1 are drawn uniformly without replacement from
    [1, total_steps) and sorted.
    """
    rng = np.random.default_rng(schedule.seed)
    t = schedule.num_checkpoints
    if t == 1:
        return [schedule.total_steps]
    pool = np.arange(1, schedule.total_steps)
    draws = rng.choice(pool, size=t - 1, replace=False)
    return sorted(int(d) for d in draws) + [schedule.total_steps]


def fit_with_checkpoints(gt_views: list, intr: CameraIntrinsics, schedule: FitSchedule,
                         bounds: np.ndarray, n_splats: int = 400,
                         background: np.ndarray | None = None,
                         lrs: LearningRates = LearningRates(), batch_size: int = 8,
                         settings: RasterSettings = DEFAULT_SETTINGS,
                         init_opacity: float = 0.1) -> CheckpointSet:
    """Run the sparse fit and snapshot it at the scheduled step counts.

"""
    if not gt_views:
        raise ValueError("need at least one supervision view")
    steps = checkpoint_steps(schedule)
    _, snaps = fit_coarse(gt_views, intr, schedule.total_steps, schedule.seed, bounds,
                          n_splats=n_splats, background=background, lrs=lrs,
                          batch_size=batch_size, settings=settings, snapshot_steps=steps,
                          init_opacity=init_opacity)
    return CheckpointSet(models=snaps, epochs=steps, seed=schedule.seed)


def render_degraded(model: SplatScene, cameras: list[Camera],
                    settings: RasterSettings = DEFAULT_SETTINGS) -> RenderedClip:
    """Render the model along the camera list; frame l comes from cameras[l]."""
    frames = [render(model, cam.intrinsics, cam.pose, settings) for cam in cameras]
    return RenderedClip(
        color=np.stack([f.color for f in frames]),
        depth=np.stack([f.depth for f in frames]),
        alpha=np.stack([f.alpha for f in frames]),
    )


def segment_bounds(length: int, n_segments: int) -> list[tuple[int, int]]:
    """Split [0, length) into n near-equal parts, remainder on the first ones."""
    if n_segments < 1:
        raise ValueError(f"need at least one segment, got {n_segments}")
    if length < n_segments:
        raise ValueError(f"cannot split {length} frames into {n_segments} segments")
    base, rem = divmod(length, n_segments)
    bounds = []
    start = 0
    for s in range(n_segments):
        size = base + (1 if s < rem else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def build_pairs(checkpoints: CheckpointSet, cameras: list[Camera], gt_clip: np.ndarray,
                n_segments: int, mask_seed: int, tau_alpha: float = 0.5,
                synth_count: int = 2, synth_size_range: tuple[float, float] = (0.005, 0.03),
                settings: RasterSettings = DEFAULT_SETTINGS) -> list[DegradedPair]:
    """One degraded/clean pair per checkpoint, with coverage + synthetic masks.

    Masks are the union of the degraded render's coverage mask (alpha below
    tau) and seeded synthetic occluders, so simulated occlusions augment the
    genuine under-training holes.
    """
    gt_clip = np.asarray(gt_clip, dtype=np.float64)
    length = len(cameras)
    if gt_clip.shape[0] != length:
        raise ValueError("gt clip length differs from camera list")
    segments = segment_bounds(length, n_segments)
    h, w = gt_clip.shape[1:3]
    pairs = []
    for t, (model, epochs) in enumerate(zip(checkpoints.models, checkpoints.epochs)):
        clip = render_degraded(model, cameras, settings)
        masks = (clip.alpha < tau_alpha).astype(np.uint8)
        for l in range(length):
            extra = synth_masks((h, w), seed=int(np.random.default_rng((mask_seed, t, l)).integers(2**31)),
                                count=synth_count, size_range=synth_size_range)
            masks[l] |= extra
        pairs.append(DegradedPair(
            degraded=clip,
            clean=gt_clip.copy(),
            cameras=list(cameras),
            checkpoint_index=t,
            epochs=epochs,
            segments=segments,
            masks=masks,
        ))
    return pairs


@dataclass
class SceneBuildSpec:
    """Everything needed to manufacture one dataset scene."""

    scene_id: str
    style: str = "synth_style"
    gen: SceneGenConfig = field(default_factory=SceneGenConfig)
    trajectory: TrajectorySpec | None = None
    width: int = 48
    height: int = 48
    fov_deg: float = 70.0
    fan_n: int = DEFAULT_FAN_N
    fan_delta: float = DEFAULT_FAN_DELTA
    sparse_interval: int = 8
    schedule: FitSchedule = field(default_factory=FitSchedule)
    n_segments: int = 3
    mask_seed: int = 0
    fit_splats: int = 400

    def __post_init__(self):
        if self.style not in STYLE_TAGS:
            raise ValueError(f"style must be one of {STYLE_TAGS}, got {self.style!r}")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_fov(self.width, self.height, self.fov_deg)


def default_scene_spec(scene_id: str, seed: int, style: str = "synth_style",
                       **overrides) -> SceneBuildSpec:
    """A ready-to-build spec; the "real" style arm uses busier textures."""
    if style == "real_style":
        gen = SceneGenConfig(seed=seed, color_noise=0.12, texture_freq=2.0, splat_density=8.0)
    else:
        gen = SceneGenConfig(seed=seed)
    start = Pose.facing(0.0, (0.0, 1.2, -0.62 * gen.extent))
    traj = TrajectorySpec(kind="forward", steps=8, step_length=0.45, start=start)
    return SceneBuildSpec(scene_id=scene_id, style=style, gen=gen, trajectory=traj,
                          mask_seed=seed, schedule=FitSchedule(seed=seed), **overrides)


@dataclass
class DatasetManifest:
    scenes: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"scenes": self.scenes}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls(scenes=json.loads(text)["scenes"])

    def validate(self, root: Path) -> None:
        ids = [s["id"] for s in self.scenes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate scene ids in manifest: {ids}")
        for s in self.scenes:
            for rel in s["pair_files"]:
                p = root / rel
                if not p.exists():
                    raise FileNotFoundError(f"manifest references missing file {p}")
                json.loads(p.read_text())


def capture_cameras(spec: SceneBuildSpec) -> list[Camera]:
    """Flattened fan captures along the trajectory: frame l = (step, view)."""
    intr = spec.intrinsics()
    cams = []
    for pose in make_trajectory(spec.trajectory):
        fan = fan_poses(pose, spec.fan_n, spec.fan_delta)
        cams.extend(Camera(pose=p, intrinsics=intr) for p in fan.poses)
    return cams


def _write_clip(dir_path: Path, color: np.ndarray, depth: np.ndarray | None = None,
                masks: np.ndarray | None = None) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    for l in range(color.shape[0]):
        imgio.save_png(color[l], dir_path / f"frame_{l:04d}.png")
        if depth is not None:
            imgio.save_plane(depth[l], dir_path / f"frame_{l:04d}.depth")
        if masks is not None:
            imgio.save_mask_png(masks[l], dir_path / f"frame_{l:04d}.mask.png")


def build_scene(spec: SceneBuildSpec, scene_dir: Path,
                settings: RasterSettings = DEFAULT_SETTINGS) -> dict:
    """Generate, capture, fit, pair, and write one scene; returns its manifest entry."""
    intr = spec.intrinsics()
    gt = generate_scene(spec.gen)
    cameras = capture_cameras(spec)
    gt_clip = render_degraded(gt, cameras, settings)

    sparse = select_sparse_frames([c.pose for c in cameras], spec.sparse_interval)
    gt_views = [(pose, gt_clip.color[i]) for i, pose in sparse]
    checkpoints = fit_with_checkpoints(gt_views, intr, spec.schedule, bounds=gt.bounds,
                                       n_splats=spec.fit_splats, background=gt.background,
                                       settings=settings)
    pairs = build_pairs(checkpoints, cameras, gt_clip.color, spec.n_segments,
                        spec.mask_seed, settings=settings)

    scene_dir.mkdir(parents=True, exist_ok=True)
    save_scene(gt, scene_dir / "gt.wfsc")
    _write_clip(scene_dir / "clips" / "gt", gt_clip.color, gt_clip.depth)

    pair_entries = []
    for pair in pairs:
        ckpt_name = f"ckpt_{pair.checkpoint_index}"
        save_scene(checkpoints.models[pair.checkpoint_index], scene_dir / f"{ckpt_name}.wfsc")
        _write_clip(scene_dir / "clips" / ckpt_name, pair.degraded.color,
                    pair.degraded.depth, pair.masks)
        pair_entries.append({
            "checkpoint_index": pair.checkpoint_index,
            "epochs": pair.epochs,
            "degraded_dir": f"clips/{ckpt_name}",
            "clean_dir": "clips/gt",
            "segments": [list(s) for s in pair.segments],
            "cameras": [
                {**pose_to_wire(c.pose),
                 "intrinsics": {"fx": c.intrinsics.fx, "fy": c.intrinsics.fy,
                                "cx": c.intrinsics.cx, "cy": c.intrinsics.cy,
                                "width": c.intrinsics.width, "height": c.intrinsics.height}}
                for c in pair.cameras
            ],
        })
    pair_json = {"scene_id": spec.scene_id, "style": spec.style, "pairs": pair_entries}
    _atomic_write(scene_dir / "pair.json", json.dumps(pair_json, indent=2, sort_keys=True))

    return {
        "id": spec.scene_id,
        "style": spec.style,
        "pair_files": [f"{spec.scene_id}/pair.json"],
        "fan": {"n": spec.fan_n, "delta_theta_deg": math.degrees(spec.fan_delta)},
        "config_hash": spec.gen.digest(),
        "num_pairs": len(pairs),
        "frames_per_clip": len(cameras),
    }


def build_dataset(specs: list[SceneBuildSpec], out_dir,
                  settings: RasterSettings = DEFAULT_SETTINGS) -> DatasetManifest:
    """Build every scene and write the manifest last, atomically."""
    if not specs:
        raise ValueError("need at least one scene spec")
    ids = [s.scene_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"scene ids must be unique, got {ids}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest()
    for spec in specs:
        try:
            entry = build_scene(spec, root / spec.scene_id, settings)
        except OSError as e:
            raise OSError(f"scene {spec.scene_id!r}: {e}") from e
        manifest.scenes.append(entry)
    _atomic_write(root / "manifest.json", manifest.to_json())
    return manifest


def load_manifest(out_dir) -> DatasetManifest:
    root = Path(out_dir)
    manifest = DatasetManifest.from_json((root / "manifest.json").read_text())
    manifest.validate(root)
    return manifest


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
