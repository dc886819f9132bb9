"""Command-line entry points for every pipeline stage.

    splatroam generate --config scenes.json --out data/
    splatroam refine   --scene-dir data/scene_00 --out runs/scene_00 --restorer oracle
    splatroam evaluate --gt gt.wfsc --world coarse.wfsc refined.wfsc --out report.json
    splatroam serve    --port 8080 gt.wfsc coarse.wfsc

WF_DATA_DIR provides the default storage root when --out is omitted.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

EXIT_USAGE = 2


def _data_dir() -> Path:
    return Path(os.environ.get("WF_DATA_DIR", "."))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def cmd_generate(args) -> int:
    from .dataset import SceneBuildSpec, build_dataset, default_scene_spec

    config_path = Path(args.config)
    if not config_path.exists():
        return _fail(f"config not found: {config_path}")
    try:
        config = json.loads(config_path.read_text())
    except json.JSONDecodeError as e:
        return _fail(f"config is not valid JSON: {e}")

    out = Path(args.out) if args.out else _data_dir() / "dataset"
    specs = []
    for entry in config.get("scenes", []):
        seed = int(entry.get("seed", 0)) + (args.seed or 0)
        spec = default_scene_spec(entry["id"], seed=seed, style=entry.get("style", "synth_style"))
        specs.append(spec)
    if not specs:
        return _fail("config lists no scenes")
    try:
        manifest = build_dataset(specs, out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.scenes)} scenes to {out}")
    for s in manifest.scenes:
        print(f"  {s['id']}: style={s['style']} pairs={s['num_pairs']} frames={s['frames_per_clip']}")
    return 0


def cmd_refine(args) -> int:
    from .benchmarks import fit_benchmark_coarse, make_benchmark_scene
    from .refine import RefineConfig, StopRule, refine_loop
    from .scene import load_scene, save_scene

    scene_dir = Path(args.scene_dir)
    if not scene_dir.exists():
        return _fail(f"scene dir not found: {scene_dir}")
    gt_path = scene_dir / "gt.wfsc"
    coarse_path = scene_dir / "coarse.wfsc"
    if not gt_path.exists() and not coarse_path.exists():
        return _fail(f"{scene_dir} holds neither gt.wfsc nor coarse.wfsc")

    overrides = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            return _fail(f"config not found: {cfg_path}")
        overrides = json.loads(cfg_path.read_text())

    seed = args.seed if args.seed is not None else int(overrides.get("seed", 0))
    out = Path(args.out) if args.out else _data_dir() / "refine"
    bench = make_benchmark_scene(seed=seed, size=int(overrides.get("size", 48)))
    if gt_path.exists():
        gt = load_scene(gt_path)
    else:
        gt = None

    if coarse_path.exists():
        coarse = load_scene(coarse_path)
    else:
        print("fitting coarse world from sparse anchors ...")
        coarse = fit_benchmark_coarse(bench)
        save_scene(coarse.quantized("coarse"), scene_dir / "coarse.wfsc")

    config = RefineConfig(
        max_outer_iters=args.max_iters,
        inner_steps=int(overrides.get("inner_steps", 200)),
        trajectories=bench.trajectories,
        fan_n=bench.fan_n,
        fan_delta=bench.fan_delta,
        restorer_kind=args.restorer,
        stop=StopRule(min_psnr_gain=float(overrides.get("min_psnr_gain", 0.1)),
                      patience=int(overrides.get("patience", 2))),
        anchor_weight=float(overrides.get("anchor_weight", 1.0)),
    )
    try:
        refined, records = refine_loop(coarse, bench.anchors, config, bench.intr,
                                       heldout_views=bench.heldout,
                                       gt_scene=gt if args.restorer == "oracle" else None,
                                       out_dir=out)
    except Exception as e:
        print(f"error: refine loop failed: {e}", file=sys.stderr)
        return 1
    save_scene(refined.quantized("refined"), out / "refined.wfsc")
    print(f"refined world written to {out / 'refined.wfsc'}")
    for r in records:
        print(f"  iter {r.iteration}: heldout {r.heldout_psnr:.2f} dB, anchors {r.anchor_psnr:.2f} dB, "
              f"filled {r.filled_pixels} px")
    if len(records) >= 1:
        gain = records[-1].heldout_psnr - records[0].heldout_psnr
        print(f"held-out gain across iterations: {gain:+.2f} dB")
    return 0


def standard_trajectories(extent: float = 10.0, steps: int = 8):
    """The six evaluation paths: panoramic, forward, the two obliques, two strafes."""
    from .geometry import Pose, TrajectorySpec

    start = Pose(np.eye(3), np.array([0.0, 1.2, -0.62 * extent]))
    turn = math.radians(6.0)
    return [
        TrajectorySpec(kind="panoramic", steps=steps, step_length=0.0, start=start),
        TrajectorySpec(kind="forward", steps=steps, step_length=0.45, start=start),
        TrajectorySpec(kind="forward_left", steps=steps, step_length=0.45, turn_rate=turn, start=start),
        TrajectorySpec(kind="forward_right", steps=steps, step_length=0.45, turn_rate=turn, start=start),
        TrajectorySpec(kind="translate_left", steps=steps, step_length=0.3, start=start),
        TrajectorySpec(kind="translate_right", steps=steps, step_length=0.3, start=start),
    ]


def cmd_evaluate(args) -> int:
    from .metrics import evaluate_worlds
    from .scene import load_scene

    gt_path = Path(args.gt)
    if not gt_path.exists():
        return _fail(f"gt scene not found: {gt_path}")
    worlds = []
    for w in args.world:
        p = Path(w)
        if not p.exists():
            return _fail(f"world file not found: {p}")
        worlds.append((p.stem, load_scene(p)))
    gt = load_scene(gt_path)

    from .geometry import CameraIntrinsics

    intr = CameraIntrinsics.from_fov(args.size, args.size, 70.0)
    report = evaluate_worlds(gt, worlds, standard_trajectories(), intr, scene_id=gt_path.stem)
    print(report.format_table())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json())
        print(f"report written to {out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    for p in args.scenes:
        if not Path(p).exists():
            return _fail(f"scene file not found: {p}")
    print(f"serving {len(args.scenes)} world(s) on port {args.port}")
    serve(args.port, args.scenes, host=args.host, width=args.size, height=args.size)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatroam",
                                     description="explore-restore-refine pipeline for splat worlds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a degraded/clean clip dataset")
    p.add_argument("--config", required=True, help="JSON config listing scenes")
    p.add_argument("--out", help="output directory (default $WF_DATA_DIR/dataset)")
    p.add_argument("--seed", type=int, help="offset added to every scene seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("refine", help="run the render-restore-refine loop on a scene")
    p.add_argument("--scene-dir", required=True, help="directory with gt.wfsc and/or coarse.wfsc")
    p.add_argument("--config", help="JSON overrides for the loop configuration")
    p.add_argument("--out", help="output directory (default $WF_DATA_DIR/refine)")
    p.add_argument("--seed", type=int, help="benchmark seed (default 0 or config seed)")
    p.add_argument("--restorer", choices=["oracle", "reproject", "identity"], default="reproject")
    p.add_argument("--max-iters", type=int, default=3)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="score candidate worlds against a ground-truth scene")
    p.add_argument("--gt", required=True, help="ground-truth scene file")
    p.add_argument("--world", nargs="+", required=True, help="candidate scene files")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--size", type=int, default=64, help="render size for evaluation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="serve loaded worlds over HTTP")
    p.add_argument("scenes", nargs="+", help="scene files to load (id = file stem)")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--size", type=int, default=128, help="default render size in pixels")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
