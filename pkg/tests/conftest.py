"""Session fixtures for the acceptance suite.

The two heavyweight fixtures are shared across acceptance criteria so the
expensive benchmark passes run exactly once per session.
"""
import time

import numpy as np
import pytest

from splatroam.benchmarks import make_benchmark_scene
from splatroam.dataset import (FitSchedule, SceneBuildSpec, build_pairs,
                               capture_cameras, fit_with_checkpoints,
                               render_degraded, select_sparse_frames)
from splatroam.geometry import TrajectorySpec, make_trajectory
from splatroam.metrics import cross_view_consistency, psnr
from splatroam.multiview import (MultiViewClip, clip_coverage_masks,
                                 render_fan_clip, synth_masks, unstitch)
from splatroam.refine import (LearningRates, RefineConfig, fit_coarse,
                              refine_loop, _mean_view_psnr)
from splatroam.rendering import DEFAULT_SETTINGS
from splatroam.restorer import make_restore_input, restore, restore_per_view
from splatroam.scene import SceneGenConfig, generate_scene

LOOP_SCENES = 5
LOOP_LRS = LearningRates(center=4e-4, log_scale=1.25e-3, quaternion=2.5e-4,
                         color=2.5e-2, opacity=5e-2)
LOOP_VARIANTS = (
    ("oracle", "oracle", True),
    ("joint", "reproject", True),
    ("perview", "reproject", False),
    ("identity", "identity", True),
)

DATASET_SCENES = 20


@pytest.fixture(scope="session")
def loop_benchmark():
    """Coarse fits plus the refine loop under every restorer, 5 seeded scenes.

    Also restores one degraded clip per scene jointly and per view (with
    synthetic occlusions on top of the coverage masks) and scores the
    restored content's cross-view consistency through the ground-truth
    geometry.
    """
    t_start = time.time()
    scenes = []
    for seed in range(LOOP_SCENES):
        bench = make_benchmark_scene(seed=seed)
        coarse = fit_coarse(bench.anchors, bench.intr, steps=500, seed=seed,
                            bounds=bench.gt_scene.bounds, n_splats=800,
                            background=bench.gt_scene.background, batch_size=9)
        coarse_heldout = _mean_view_psnr(coarse, bench.heldout, bench.intr, DEFAULT_SETTINGS)
        coarse_anchor = _mean_view_psnr(coarse, bench.anchors, bench.intr, DEFAULT_SETTINGS)

        path = make_trajectory(bench.trajectories[0])
        clip = render_fan_clip(coarse, bench.intr, path, bench.fan_n, bench.fan_delta)
        gt_clip = render_fan_clip(bench.gt_scene, bench.intr, path, bench.fan_n, bench.fan_delta)
        masks = clip_coverage_masks(clip, 0.5)
        h, w = clip.frame_shape
        for t in range(clip.steps):
            for k in range(clip.views):
                masks[t, k] |= synth_masks((h, w), seed=seed * 1000 + t * 10 + k,
                                           count=2, size_range=(0.01, 0.05))
        rinput = make_restore_input(clip, masks, scene_extent=10.0)
        consistency = {}
        for label, fn in (("joint", restore), ("perview", restore_per_view)):
            colors, _ = unstitch(fn(rinput, "reproject").unified_restored)
            restored_clip = MultiViewClip(color=colors, depth=clip.depth, alpha=clip.alpha,
                                          n=clip.n, delta_theta=clip.delta_theta,
                                          path=clip.path, intrinsics=clip.intrinsics)
            consistency[label] = cross_view_consistency(restored_clip, geometry=gt_clip)

        runs = {}
        for label, kind, joint in LOOP_VARIANTS:
            cfg = RefineConfig(max_outer_iters=2, inner_steps=200,
                               trajectories=bench.trajectories, fan_n=bench.fan_n,
                               fan_delta=bench.fan_delta, restorer_kind=kind,
                               joint_restore=joint, anchor_weight=5.0,
                               batch_size=6, lrs=LOOP_LRS)
            _, records = refine_loop(coarse, bench.anchors, cfg, bench.intr,
                                     heldout_views=bench.heldout, gt_scene=bench.gt_scene)
            runs[label] = {
                "gain": records[-1].heldout_psnr - coarse_heldout,
                "worst_anchor_drop": coarse_anchor - min(r.anchor_psnr for r in records),
                "iterations": len(records),
            }
        scenes.append({
            "seed": seed,
            "coarse_heldout": coarse_heldout,
            "coarse_anchor": coarse_anchor,
            "consistency": consistency,
            "runs": runs,
        })
        print(f"  [loop benchmark] scene {seed}: "
              + " ".join(f"{l}={runs[l]['gain']:+.2f}dB" for l, _, _ in LOOP_VARIANTS), flush=True)
    return {"scenes": scenes, "elapsed_s": time.time() - t_start}


def _dataset_scene_spec(seed: int) -> SceneBuildSpec:
    gen = SceneGenConfig(seed=seed)
    start_z = -0.62 * gen.extent
    from splatroam.geometry import Pose

    start = Pose(np.eye(3), np.array([0.0, 1.2, start_z]))
    return SceneBuildSpec(
        scene_id=f"accept_{seed:02d}",
        gen=gen,
        trajectory=TrajectorySpec(kind="forward", steps=6, step_length=0.5, start=start),
        width=48, height=48, sparse_interval=6,
        schedule=FitSchedule(total_steps=160, num_checkpoints=4, seed=seed),
        n_segments=3, mask_seed=seed, fit_splats=300,
    )


@pytest.fixture(scope="session")
def dataset_benchmark():
    """Checkpointed fits over 20 seeded scenes with degraded/clean pairs.

    Collects per-checkpoint mean PSNR (for the monotonicity criterion),
    pair alignment flags, and cross-view consistency of GT vs checkpoint
    clips. Consistency renders at 96 px so the texture-resampling noise
    floor sits well below the world-space ghosting errors it must detect;
    warps run through GT geometry for both sides.
    """
    from splatroam.geometry import CameraIntrinsics

    t_start = time.time()
    hi_intr = CameraIntrinsics.from_fov(96, 96, 70.0)
    psnr_by_index = []  # (scenes, checkpoints)
    aligned = []
    gt_consistency = []
    ckpt_consistency = []  # per scene: list per checkpoint
    for seed in range(DATASET_SCENES):
        spec = _dataset_scene_spec(seed)
        gt = generate_scene(spec.gen)
        intr = spec.intrinsics()
        cameras = capture_cameras(spec)
        gt_clip = render_degraded(gt, cameras)
        sparse = select_sparse_frames([c.pose for c in cameras], spec.sparse_interval)
        gt_views = [(pose, gt_clip.color[i]) for i, pose in sparse]
        checkpoints = fit_with_checkpoints(gt_views, intr, spec.schedule, bounds=gt.bounds,
                                           n_splats=spec.fit_splats, background=gt.background)
        pairs = build_pairs(checkpoints, cameras, gt_clip.color, spec.n_segments,
                            mask_seed=spec.mask_seed)

        path = make_trajectory(spec.trajectory)
        gt_hi = render_fan_clip(gt, hi_intr, path, spec.fan_n, spec.fan_delta)
        gt_consistency.append(cross_view_consistency(gt_hi, geometry=gt_hi))

        row = []
        cons_row = []
        for pair in pairs:
            frame_psnrs = [psnr(pair.degraded.color[l], pair.clean[l])
                           for l in range(len(pair.degraded))]
            row.append(float(np.mean(frame_psnrs)))
            model = checkpoints.models[pair.checkpoint_index]
            ck_hi = render_fan_clip(model, hi_intr, path, spec.fan_n, spec.fan_delta)
            cons_row.append(cross_view_consistency(ck_hi, geometry=gt_hi))
            aligned.append(
                len(pair.degraded) == pair.clean.shape[0] == len(pair.cameras)
                and pair.degraded.color.shape == pair.clean.shape
                and pair.masks.shape == pair.clean.shape[:3]
                and pair.segments[0][0] == 0 and pair.segments[-1][1] == len(pair.cameras))
        psnr_by_index.append(row)
        ckpt_consistency.append(cons_row)
        print(f"  [dataset benchmark] scene {seed}: checkpoint PSNRs "
              + " ".join(f"{v:.1f}" for v in row), flush=True)
    return {
        "psnr_by_index": np.array(psnr_by_index),
        "aligned": aligned,
        "gt_consistency": np.array(gt_consistency),
        "ckpt_consistency": np.array(ckpt_consistency),
        "elapsed_s": time.time() - t_start,
    }
