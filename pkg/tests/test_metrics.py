import math

import numpy as np
import pytest

from splatroam.geometry import CameraIntrinsics, Pose, TrajectorySpec
from splatroam.metrics import (EvalReport, EvalRow, cross_view_consistency,
                               evaluate_worlds, hole_ratio, psnr, ssim)
from splatroam.multiview import MultiViewClip, render_fan_clip
from splatroam.rendering import FrameBuffer, render
from splatroam.scene import SceneGenConfig, generate_scene


class TestPsnr:
    def test_identical_capped(self):
        img = np.random.default_rng(0).uniform(0, 1, (16, 16, 3))
        assert psnr(img, img) == 99.0

    def test_uniform_error_closed_form(self):
        a = np.full((8, 8, 3), 0.5)
        b = np.full((8, 8, 3), 0.6)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-6)

    def test_matches_direct_mse(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.uniform(0, 1, (12, 12, 3))
            b = rng.uniform(0, 1, (12, 12, 3))
            mse = np.mean((a - b) ** 2)
            assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse), abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a, b = rng.uniform(0, 1, (8, 8, 3)), rng.uniform(0, 1, (8, 8, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((5, 5, 3)))


class TestSsim:
    def test_identical_is_one(self):
        img = np.random.default_rng(3).uniform(0, 1, (24, 24, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_constant_half_vs_negative(self):
        a = np.full((16, 16), 0.5)
        assert ssim(a, 1.0 - a) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a, b = rng.uniform(0, 1, (20, 20, 3)), rng.uniform(0, 1, (20, 20, 3))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_matches_reference_implementation(self):
        skimage_metrics = pytest.importorskip("skimage.metrics")
        rng = np.random.default_rng(5)
        for _ in range(10):
            base = rng.uniform(0.2, 0.8, (32, 32))
            noisy = np.clip(base + rng.normal(0, 0.08, (32, 32)), 0, 1)
            ours = ssim(base, noisy)
            ref = skimage_metrics.structural_similarity(
                base, noisy, gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, data_range=1.0)
            assert ours == pytest.approx(ref, abs=1e-4)


class TestHoleRatio:
    def test_empty_scene(self):
        fb = FrameBuffer(color=np.zeros((4, 4, 3)), depth=np.zeros((4, 4)), alpha=np.zeros((4, 4)))
        assert hole_ratio(fb, 0.5) == 1.0

    def test_fully_covered(self):
        fb = FrameBuffer(color=np.zeros((4, 4, 3)), depth=np.ones((4, 4)), alpha=np.ones((4, 4)))
        assert hole_ratio(fb, 0.5) == 0.0

    def test_equals_coverage_mask_mean(self):
        from splatroam.multiview import coverage_mask

        rng = np.random.default_rng(6)
        fb = FrameBuffer(color=np.zeros((16, 16, 3)), depth=np.ones((16, 16)),
                         alpha=rng.uniform(0, 1, (16, 16)))
        assert hole_ratio(fb, 0.4) == coverage_mask(fb, 0.4).mean()


@pytest.fixture(scope="module")
def gt_setup():
    gt = generate_scene(SceneGenConfig(seed=21))
    intr = CameraIntrinsics.from_fov(48, 48, 70.0)
    start = Pose(np.eye(3), np.array([0.0, 1.2, -6.2]))
    spec = TrajectorySpec(kind="forward", steps=4, step_length=0.5, start=start)
    return gt, intr, spec, start


class TestCrossViewConsistency:
    def test_gt_clip_near_noise_floor(self, gt_setup):
        gt, intr, spec, start = gt_setup
        from splatroam.geometry import make_trajectory

        clip = render_fan_clip(gt, intr, make_trajectory(spec), n=1, delta_theta=math.radians(30))
        err = cross_view_consistency(clip)
        assert err <= 0.035  # resampling noise floor, measured on the benchmark

    def test_unrelated_view_much_worse(self, gt_setup):
        gt, intr, spec, start = gt_setup
        clip = render_fan_clip(gt, intr, [start], n=1, delta_theta=math.radians(30))
        rng = np.random.default_rng(7)
        clip.color[0, 2] = rng.uniform(0, 1, clip.color[0, 2].shape)
        err = cross_view_consistency(clip)
        assert err > 0.1

    def test_single_view_rejected(self, gt_setup):
        gt, intr, _, start = gt_setup
        clip = render_fan_clip(gt, intr, [start], n=0)
        with pytest.raises(ValueError):
            cross_view_consistency(clip)

    def test_zero_overlap_flagged_undefined(self, gt_setup):
        gt, intr, _, start = gt_setup
        clip = render_fan_clip(gt, intr, [start], n=1, delta_theta=math.radians(160.0))
        assert math.isnan(cross_view_consistency(clip))


class TestEvalReport:
    def test_roundtrip(self):
        report = EvalReport(rows=[
            EvalRow("coarse", "s0", 20.0, 0.8, 0.02, 0.1),
            EvalRow("refined", "s0", 24.0, 0.9, float("nan"), 0.05),
        ], config={"holdout_interval": 4})
        again = EvalReport.from_json(report.to_json())
        assert again.rows[0] == report.rows[0]
        assert math.isnan(again.rows[1].consistency)
        assert again.config == report.config

    def test_table_lists_methods(self):
        report = EvalReport(rows=[EvalRow("a", "s", 20.0, 0.8, 0.02, 0.1),
                                  EvalRow("b", "s", 21.0, 0.9, 0.01, 0.0)])
        table = report.format_table()
        assert "a" in table and "b" in table and "psnr" in table


class TestEvaluateWorlds:
    def test_gt_vs_itself_is_perfect(self, gt_setup):
        gt, intr, spec, _ = gt_setup
        report = evaluate_worlds(gt, [("gt_copy", gt)], [spec], intr, holdout_interval=2)
        row = report.rows[0]
        assert row.psnr == 99.0
        assert row.ssim == pytest.approx(1.0, abs=1e-9)
        assert row.consistency <= 0.035

    def test_degraded_world_scores_lower(self, gt_setup):
        gt, intr, spec, _ = gt_setup
        worse = gt.copy()
        rng = np.random.default_rng(8)
        worse.centers = worse.centers + rng.normal(0, 0.05, worse.centers.shape)
        report = evaluate_worlds(gt, [("gt", gt), ("jittered", worse)], [spec], intr,
                                 holdout_interval=2)
        agg = report.aggregate()
        assert agg["jittered"]["psnr"] < agg["gt"]["psnr"]
        assert agg["jittered"]["ssim"] < agg["gt"]["ssim"]
