#!/usr/bin/env python3
"""Run the refinement benchmark: coarse fits plus the render-restore-refine
loop under each restorer, reporting held-out PSNR gains, anchor drift, and
cross-view consistency per scene.
"""
import argparse
import time

import numpy as np

from splatroam.benchmarks import make_benchmark_scene
from splatroam.refine import LearningRates, RefineConfig, refine_loop, fit_coarse, _mean_view_psnr
from splatroam.rendering import DEFAULT_SETTINGS

LOOP_LRS = LearningRates(center=8e-4, log_scale=2.5e-3, quaternion=5e-4,
                         color=2.5e-2, opacity=5e-2)

VARIANTS = [
    ("oracle", "oracle", True),
    ("joint-reproject", "reproject", True),
    ("perview-reproject", "reproject", False),
    ("identity", "identity", True),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=5)
    parser.add_argument("--iters", type=int, default=2)
    parser.add_argument("--inner-steps", type=int, default=150)
    parser.add_argument("--fit-steps", type=int, default=500)
    args = parser.parse_args()

    gains = {label: [] for label, _, _ in VARIANTS}
    t_start = time.time()
    for seed in range(args.scenes):
        bench = make_benchmark_scene(seed=seed)
        coarse = fit_coarse(bench.anchors, bench.intr, steps=args.fit_steps, seed=seed,
                            bounds=bench.gt_scene.bounds, n_splats=800,
                            background=bench.gt_scene.background, batch_size=9)
        held0 = _mean_view_psnr(coarse, bench.heldout, bench.intr, DEFAULT_SETTINGS)
        anchor0 = _mean_view_psnr(coarse, bench.anchors, bench.intr, DEFAULT_SETTINGS)
        line = [f"scene {seed}: coarse held {held0:5.2f} anchor {anchor0:5.2f}"]
        for label, kind, joint in VARIANTS:
            cfg = RefineConfig(max_outer_iters=args.iters, inner_steps=args.inner_steps,
                               trajectories=bench.trajectories, fan_n=bench.fan_n,
                               fan_delta=bench.fan_delta, restorer_kind=kind,
                               joint_restore=joint, anchor_weight=4.0, tau_alpha=0.85,
                               batch_size=6, lrs=LOOP_LRS)
            _, records = refine_loop(coarse, bench.anchors, cfg, bench.intr,
                                     heldout_views=bench.heldout, gt_scene=bench.gt_scene)
            gain = records[-1].heldout_psnr - held0
            drift = min(r.anchor_psnr for r in records) - anchor0
            gains[label].append(gain)
            line.append(f"{label} {gain:+.2f} (drift {drift:+.2f})")
        print(" | ".join(line), flush=True)

    print(f"\n{args.scenes} scenes in {time.time() - t_start:.0f}s")
    for label in gains:
        arr = np.array(gains[label])
        print(f"{label:18s}: mean gain {arr.mean():+.2f} dB (min {arr.min():+.2f}, max {arr.max():+.2f})")


if __name__ == "__main__":
    main()
