import json
import math

import numpy as np
import pytest

from splatroam.dataset import (CheckpointSet, DatasetManifest, FitSchedule,
                               build_dataset, build_pairs, capture_cameras,
                               checkpoint_steps, default_scene_spec,
                               fit_with_checkpoints, load_manifest,
                               render_degraded, segment_bounds,
                               select_sparse_frames)
from splatroam.geometry import Camera, CameraIntrinsics, Pose, TrajectorySpec, make_trajectory
from splatroam.metrics import psnr
from splatroam.scene import SceneGenConfig, generate_scene, load_scene


def small_spec(scene_id="s0", seed=5):
    spec = default_scene_spec(scene_id, seed=seed)
    # shrink for test runtime: short path, tiny fit
    start = spec.trajectory.start
    return type(spec)(
        scene_id=spec.scene_id, style=spec.style, gen=spec.gen,
        trajectory=TrajectorySpec(kind="forward", steps=4, step_length=0.5, start=start),
        width=32, height=32, fan_n=1, fan_delta=spec.fan_delta,
        sparse_interval=4, schedule=FitSchedule(total_steps=30, num_checkpoints=2, seed=seed),
        n_segments=2, mask_seed=seed, fit_splats=150,
    )


class TestSelectSparseFrames:
    def test_interval_three(self):
        path = make_trajectory(TrajectorySpec(kind="forward", steps=10, step_length=0.1))
        picked = select_sparse_frames(path, 3)
        assert [i for i, _ in picked] == [0, 3, 6, 9]

    def test_interval_one_takes_all(self):
        path = make_trajectory(TrajectorySpec(kind="forward", steps=5, step_length=0.1))
        assert [i for i, _ in select_sparse_frames(path, 1)] == [0, 1, 2, 3, 4]

    def test_interval_beyond_length(self):
        path = make_trajectory(TrajectorySpec(kind="forward", steps=4, step_length=0.1))
        assert [i for i, _ in select_sparse_frames(path, 99)] == [0]

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            select_sparse_frames([], 0)


class TestCheckpointSteps:
    def test_single_checkpoint_is_final_step(self):
        assert checkpoint_steps(FitSchedule(total_steps=50, num_checkpoints=1, seed=3)) == [50]

    def test_strictly_increasing_ending_at_total(self):
        for seed in range(20):
            steps = checkpoint_steps(FitSchedule(total_steps=40, num_checkpoints=4, seed=seed))
            assert steps[-1] == 40
            assert all(b > a for a, b in zip(steps, steps[1:]))
            assert all(1 <= s <= 40 for s in steps)

    def test_deterministic(self):
        s = FitSchedule(total_steps=100, num_checkpoints=5, seed=9)
        assert checkpoint_steps(s) == checkpoint_steps(s)


class TestSegments:
    def test_even_split(self):
        assert segment_bounds(12, 3) == [(0, 4), (4, 8), (8, 12)]

    def test_remainder_on_first(self):
        bounds = segment_bounds(10, 3)
        assert bounds == [(0, 4), (4, 7), (7, 10)]
        assert [b - a for a, b in bounds] == [4, 3, 3]

    def test_too_few_frames(self):
        with pytest.raises(ValueError):
            segment_bounds(2, 3)


@pytest.fixture(scope="module")
def fitted():
    spec = small_spec()
    gt = generate_scene(spec.gen)
    intr = spec.intrinsics()
    cameras = capture_cameras(spec)
    gt_clip = render_degraded(gt, cameras)
    sparse = select_sparse_frames([c.pose for c in cameras], spec.sparse_interval)
    gt_views = [(pose, gt_clip.color[i]) for i, pose in sparse]
    ckpts = fit_with_checkpoints(gt_views, intr, spec.schedule, bounds=gt.bounds,
                                 n_splats=spec.fit_splats, background=gt.background)
    return spec, gt, intr, cameras, gt_clip, gt_views, ckpts


class TestFitWithCheckpoints:
    def test_checkpoint_metadata(self, fitted):
        spec, _, _, _, _, _, ckpts = fitted
        assert len(ckpts.models) == spec.schedule.num_checkpoints
        assert all(m.meta.provenance == "checkpoint" for m in ckpts.models)
        assert ckpts.epochs[-1] == spec.schedule.total_steps

    def test_deterministic(self, fitted):
        spec, gt, intr, cameras, gt_clip, gt_views, ckpts = fitted
        again = fit_with_checkpoints(gt_views, intr, spec.schedule, bounds=gt.bounds,
                                     n_splats=spec.fit_splats, background=gt.background)
        for a, b in zip(ckpts.models, again.models):
            assert np.array_equal(a.centers, b.centers)
            assert np.array_equal(a.colors, b.colors)

    def test_later_checkpoint_fits_supervision_better(self, fitted):
        _, _, intr, _, _, gt_views, ckpts = fitted
        from splatroam.rendering import render

        def mean_psnr(model):
            return np.mean([psnr(render(model, intr, p).color, img) for p, img in gt_views])

        assert mean_psnr(ckpts.models[-1]) > mean_psnr(ckpts.models[0])

    def test_epochs_must_increase(self):
        with pytest.raises(ValueError):
            CheckpointSet(models=[None, None], epochs=[5, 5], seed=0)


class TestRenderDegraded:
    def test_frame_count_matches_cameras(self, fitted):
        _, _, _, cameras, _, _, ckpts = fitted
        clip = render_degraded(ckpts.models[0], cameras[:3])
        assert len(clip) == 3

    def test_deterministic(self, fitted):
        _, _, _, cameras, _, _, ckpts = fitted
        a = render_degraded(ckpts.models[0], cameras[:2])
        b = render_degraded(ckpts.models[0], cameras[:2])
        assert np.array_equal(a.color, b.color)

    def test_single_camera(self, fitted):
        _, _, _, cameras, _, _, ckpts = fitted
        assert len(render_degraded(ckpts.models[-1], cameras[:1])) == 1


class TestBuildPairs:
    def test_pair_alignment(self, fitted):
        spec, _, _, cameras, gt_clip, _, ckpts = fitted
        pairs = build_pairs(ckpts, cameras, gt_clip.color, spec.n_segments, mask_seed=1)
        assert len(pairs) == len(ckpts.models)
        for pair in pairs:
            assert len(pair.degraded) == len(pair.clean) == len(pair.cameras)
            assert pair.degraded.color.shape == pair.clean.shape
            assert pair.masks.shape == pair.degraded.color.shape[:3]

    def test_segments_partition(self, fitted):
        spec, _, _, cameras, gt_clip, _, ckpts = fitted
        pairs = build_pairs(ckpts, cameras, gt_clip.color, spec.n_segments, mask_seed=1)
        length = len(cameras)
        for pair in pairs:
            assert pair.segments[0][0] == 0
            assert pair.segments[-1][1] == length
            for (a0, a1), (b0, b1) in zip(pair.segments, pair.segments[1:]):
                assert a1 == b0

    def test_masks_superset_of_coverage(self, fitted):
        spec, _, _, cameras, gt_clip, _, ckpts = fitted
        pairs = build_pairs(ckpts, cameras, gt_clip.color, spec.n_segments, mask_seed=1)
        for pair in pairs:
            coverage = (pair.degraded.alpha < 0.5)
            assert np.all(pair.masks.astype(bool) | ~coverage)

    def test_too_many_segments_rejected(self, fitted):
        _, _, _, cameras, gt_clip, _, ckpts = fitted
        with pytest.raises(ValueError):
            build_pairs(ckpts, cameras, gt_clip.color, len(cameras) + 1, mask_seed=1)


class TestBuildDataset:
    def test_two_scene_build(self, tmp_path):
        specs = [small_spec("scene_a", seed=5), small_spec("scene_b", seed=6)]
        manifest = build_dataset(specs, tmp_path)
        assert len(manifest.scenes) == 2
        assert {s["id"] for s in manifest.scenes} == {"scene_a", "scene_b"}
        total_pairs = sum(s["num_pairs"] for s in manifest.scenes)
        assert total_pairs == sum(s.schedule.num_checkpoints for s in specs)

        # manifest round-trips and its referenced files exist/parse
        loaded = load_manifest(tmp_path)
        assert loaded.to_json() == manifest.to_json()

        # on-disk layout: gt scene, clip pngs, depth planes, mask pngs, pair.json
        scene_dir = tmp_path / "scene_a"
        assert (scene_dir / "gt.wfsc").exists()
        gt = load_scene(scene_dir / "gt.wfsc")
        assert gt.meta.provenance == "ground_truth"
        pair = json.loads((scene_dir / "pair.json").read_text())
        first = pair["pairs"][0]
        frames = sorted((scene_dir / first["degraded_dir"]).glob("frame_*.png"))
        assert len([f for f in frames if not f.name.endswith(".mask.png")]) == len(first["cameras"])
        assert any(f.suffix == ".depth" for f in (scene_dir / first["degraded_dir"]).iterdir())
        assert any(f.name.endswith(".mask.png") for f in (scene_dir / first["degraded_dir"]).iterdir())

    def test_duplicate_ids_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            build_dataset([small_spec("x"), small_spec("x")], tmp_path)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            build_dataset([], tmp_path)
