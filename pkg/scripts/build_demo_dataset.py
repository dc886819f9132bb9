#!/usr/bin/env python3
"""Build a small degraded/clean clip dataset with both style arms.

Equivalent to `splatroam generate` with a written-out config; kept as a
script so the arm mix and sizes are easy to tweak for experiments.
"""
import argparse
import time
from pathlib import Path

from splatroam.dataset import build_dataset, default_scene_spec


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    parser.add_argument("--scenes", type=int, default=4, help="scenes per style arm")
    parser.add_argument("--seed", type=int, default=0, help="seed offset")
    args = parser.parse_args()

    specs = []
    for i in range(args.scenes):
        specs.append(default_scene_spec(f"synth_{i:02d}", seed=args.seed + i, style="synth_style"))
        specs.append(default_scene_spec(f"real_{i:02d}", seed=args.seed + 100 + i, style="real_style"))

    t0 = time.time()
    manifest = build_dataset(specs, Path(args.out))
    print(f"built {len(manifest.scenes)} scenes in {time.time() - t0:.0f}s -> {args.out}")
    for s in manifest.scenes:
        print(f"  {s['id']}: {s['style']}, {s['num_pairs']} pairs, {s['frames_per_clip']} frames/clip")


if __name__ == "__main__":
    main()
