"""Seeded benchmark worlds: a procedural scene, sparse anchor captures near
the start pose, and held-out novel views along a forward exploration path.

Everything is deterministic in the seed, so thresholds measured here are
stable across runs and machines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, Pose, TrajectorySpec, make_trajectory, rot_y
from .multiview import DEFAULT_FAN_DELTA, DEFAULT_FAN_N
from .refine import LearningRates, fit_coarse
from .rendering import DEFAULT_SETTINGS, RasterSettings, render
from .scene import SceneGenConfig, SplatScene, generate_scene

CAMERA_HEIGHT = 1.2


@dataclass
class BenchmarkScene:
    scene_id: str
    gt_scene: SplatScene
    intr: CameraIntrinsics
    anchors: list  # (Pose, image) supervision for the coarse fit
    heldout: list  # (Pose, image) novel views, never supervised directly
    trajectories: list[TrajectorySpec]
    fan_n: int
    fan_delta: float
    start: Pose
    seed: int


def _anchor_poses(extent: float) -> list[Pose]:
    z0 = -0.62 * extent
    poses = []
    for x in (-0.9, 0.0, 0.9):
        for yaw_deg in (-24.0, 0.0, 24.0):
            poses.append(Pose(rot_y(math.radians(yaw_deg)), np.array([x, CAMERA_HEIGHT, z0])))
    return poses


def make_benchmark_scene(seed: int, size: int = 48, fov_deg: float = 70.0,
                         fan_n: int = DEFAULT_FAN_N, fan_delta: float = DEFAULT_FAN_DELTA,
                         traj_steps: int = 8, step_length: float = 0.5,
                         settings: RasterSettings = DEFAULT_SETTINGS) -> BenchmarkScene:
    """Build the seeded benchmark: GT world, anchor captures, held-out views.

    Held-out poses sit between the supervised path stations (offset by half
    a step and a few degrees of yaw), so they are genuinely novel for both
    the coarse fit and the refinement supervision.
    """
    gen = SceneGenConfig(seed=seed)
    gt = generate_scene(gen)
    intr = CameraIntrinsics.from_fov(size, size, fov_deg)

    anchor_poses = _anchor_poses(gen.extent)
    anchors = [(p, render(gt, intr, p, settings).color) for p in anchor_poses]

    z0 = -0.62 * gen.extent
    start = Pose(np.eye(3), np.array([0.0, CAMERA_HEIGHT, z0]))
    trajectories = [TrajectorySpec(kind="forward", steps=traj_steps, step_length=step_length, start=start)]

    heldout_start = Pose(rot_y(math.radians(8.0)),
                         np.array([0.22, CAMERA_HEIGHT, z0 + 0.5 * step_length]))
    heldout_spec = TrajectorySpec(kind="forward", steps=traj_steps - 1,
                                  step_length=step_length, start=heldout_start)
    heldout = [(p, render(gt, intr, p, settings).color) for p in make_trajectory(heldout_spec)]

    return BenchmarkScene(
        scene_id=f"bench_{seed:04d}",
        gt_scene=gt,
        intr=intr,
        anchors=anchors,
        heldout=heldout,
        trajectories=trajectories,
        fan_n=fan_n,
        fan_delta=fan_delta,
        start=start,
        seed=seed,
    )


def fit_benchmark_coarse(bench: BenchmarkScene, steps: int = 400, n_splats: int = 700,
                         settings: RasterSettings = DEFAULT_SETTINGS) -> SplatScene:
    """The standard coarse world for a benchmark scene (seeded by the scene)."""
    return fit_coarse(bench.anchors, bench.intr, steps=steps, seed=bench.seed,
                      bounds=bench.gt_scene.bounds, n_splats=n_splats,
                      background=bench.gt_scene.background, batch_size=9,
                      settings=settings)
