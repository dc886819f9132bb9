#!/usr/bin/env python3
"""Prepare a seeded benchmark world for interactive exploration.

Writes gt.wfsc and coarse.wfsc into the output directory and prints the
suggested start pose. Serve them with:

    splatroam serve --port 8080 --size 64 <out>/gt.wfsc <out>/coarse.wfsc
"""
import argparse
import json
from pathlib import Path

from splatroam.benchmarks import fit_benchmark_coarse, make_benchmark_scene
from splatroam.geometry import pose_to_wire
from splatroam.scene import save_scene


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--size", type=int, default=48, help="benchmark render size")
    parser.add_argument("--fit-steps", type=int, default=400)
    parser.add_argument("--fit-splats", type=int, default=700)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench = make_benchmark_scene(seed=args.seed, size=args.size)
    save_scene(bench.gt_scene, out / "gt.wfsc")
    print(f"ground truth written ({bench.gt_scene.num_splats} splats)")
    coarse = fit_benchmark_coarse(bench, steps=args.fit_steps, n_splats=args.fit_splats)
    save_scene(coarse.quantized("coarse"), out / "coarse.wfsc")
    print(f"coarse world written ({coarse.num_splats} splats)")
    print("start pose:", json.dumps(pose_to_wire(bench.start)))


if __name__ == "__main__":
    main()
