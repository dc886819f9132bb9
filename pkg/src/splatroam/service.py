"""HTTP frame service: render loaded worlds on demand, compare coarse vs
refined, and run refinement jobs in the background.

Readers (render/status/metrics) are lock-free against a dict whose values
swap atomically; the single refine job works on a private copy and
publishes a new world only when an iteration completes, so a render never
sees a half-updated scene.
"""
from __future__ import annotations

import io
import math
import threading
import uuid
from dataclasses import dataclass, field, asdict

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import __version__
from .geometry import (CameraIntrinsics, ExplicitPath, Pose, TrajectorySpec,
                       pose_from_wire, rot_y, trajectory_spec_from_dict)
from .imgio import png_bytes
from .metrics import EvalReport, evaluate_worlds
from .refine import RefineConfig, StopRule, refine_loop
from .rendering import DEFAULT_SETTINGS, render
from .restorer import RESTORER_KINDS
from .scene import SplatScene, load_scene

DEFAULT_RENDER_SIZE = 128
DEFAULT_FOV_DEG = 70.0
MAX_RENDER_SIZE = 512


class RequestError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class RefineJob:
    job_id: str
    status: str = "idle"  # idle | running | done | failed
    progress: int = 0
    total_iters: int = 0
    report_tail: list[dict] = field(default_factory=list)
    error: str = ""


@dataclass
class ServiceState:
    """Loaded worlds plus the (single) refine job and render defaults."""

    worlds: dict[str, SplatScene] = field(default_factory=dict)
    width: int = DEFAULT_RENDER_SIZE
    height: int = DEFAULT_RENDER_SIZE
    fov_deg: float = DEFAULT_FOV_DEG
    fan_n: int = 1
    fan_delta_deg: float = 30.0
    job: RefineJob = field(default_factory=lambda: RefineJob(job_id=""))
    latest_report: EvalReport | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    thread: threading.Thread | None = None

    def intrinsics(self, width: int | None = None, height: int | None = None) -> CameraIntrinsics:
        w = width or self.width
        h = height or self.height
        return CameraIntrinsics.from_fov(w, h, self.fov_deg)

    def add_world(self, world_id: str, scene: SplatScene) -> None:
        if world_id in self.worlds:
            raise ValueError(f"duplicate world id {world_id!r}")
        self.worlds[world_id] = scene


def load_state(scene_paths: list, width: int = DEFAULT_RENDER_SIZE,
               height: int = DEFAULT_RENDER_SIZE) -> ServiceState:
    """Load scene files; ids come from file stems (gt.wfsc -> "gt")."""
    from pathlib import Path

    state = ServiceState(width=width, height=height)
    for p in scene_paths:
        path = Path(p)
        state.add_world(path.stem, load_scene(path))
    return state


def _parse_pose(data, field_name: str = "pose") -> Pose:
    if not isinstance(data, dict):
        raise RequestError(400, f"{field_name} must be an object with quaternion and translation")
    for key in ("quaternion", "translation"):
        if key not in data:
            raise RequestError(400, f"{field_name}.{key} is missing")
    try:
        return pose_from_wire(data)
    except (ValueError, TypeError, KeyError) as e:
        raise RequestError(400, f"{field_name} is invalid: {e}") from e


def _parse_size(body, key: str, default: int) -> int:
    val = body.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or not (8 <= val <= MAX_RENDER_SIZE):
        raise RequestError(400, f"{key} must be an integer in [8, {MAX_RENDER_SIZE}]")
    return val


def _job_trajectory(body, state: ServiceState):
    traj = body.get("trajectory")
    if traj is None:
        raise RequestError(400, "trajectory is missing")
    if isinstance(traj, dict) and "poses" in traj:
        poses = traj["poses"]
        if not isinstance(poses, list) or not poses:
            raise RequestError(400, "trajectory.poses must be a non-empty list")
        parsed = [_parse_pose(p, f"trajectory.poses[{i}]") for i, p in enumerate(poses)]
        return ExplicitPath(poses=tuple(parsed))
    if isinstance(traj, dict) and "kind" in traj:
        try:
            return trajectory_spec_from_dict(traj)
        except (ValueError, TypeError, KeyError) as e:
            raise RequestError(400, f"trajectory is invalid: {e}") from e
    raise RequestError(400, "trajectory must carry either poses or kind")


def _synthesize_anchors(state: ServiceState, gt: SplatScene, around: Pose) -> list:
    """Sparse GT captures around a pose, standing in for the original
    supervision views a real capture pipeline would own."""
    intr = state.intrinsics()
    anchors = []
    for dx in (-0.8, 0.0, 0.8):
        for yaw in (-0.4, 0.0, 0.4):
            offset = around.rotation @ np.array([dx, 0.0, 0.0])
            pose = Pose(around.rotation @ rot_y(yaw), around.translation + offset)
            anchors.append((pose, render(gt, intr, pose).color))
    return anchors


def _run_refine_job(state: ServiceState, base_world: str, trajectory, restorer: str,
                    iters: int) -> None:
    try:
        with state.lock:
            coarse = state.worlds[base_world].copy()
            gt = state.worlds.get("gt")
        intr = state.intrinsics()
        start = trajectory.poses[0] if isinstance(trajectory, ExplicitPath) else trajectory.start
        anchors = _synthesize_anchors(state, gt, start) if gt is not None else []
        config = RefineConfig(
            max_outer_iters=iters,
            inner_steps=150,
            trajectories=[trajectory],
            fan_n=state.fan_n,
            fan_delta=math.radians(state.fan_delta_deg),
            restorer_kind=restorer,
            stop=StopRule(min_psnr_gain=0.05, patience=2),
        )

        def on_iteration(scene: SplatScene, record) -> None:
            with state.lock:
                state.worlds[f"iteration-{record.iteration}"] = scene
                state.worlds["refined"] = scene
                state.job.progress = record.iteration + 1
                tail = asdict(record)
                if isinstance(tail.get("consistency"), float) and math.isnan(tail["consistency"]):
                    tail["consistency"] = None
                state.job.report_tail = (state.job.report_tail + [tail])[-5:]

        refine_loop(coarse, anchors, config, intr, gt_scene=gt, on_iteration=on_iteration)
        with state.lock:
            state.job.status = "done"
    except Exception as e:  # surfaced through /refine/status
        with state.lock:
            state.job.status = "failed"
            state.job.error = str(e)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="splatroam frame service", version=__version__)

    @app.exception_handler(RequestError)
    async def handle_request_error(_req: Request, exc: RequestError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise RequestError(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            raise RequestError(400, "request body must be a JSON object")
        return body

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/worlds")
    def worlds():
        with state.lock:
            return {"worlds": sorted(state.worlds.keys())}

    @app.post("/render")
    async def render_world(request: Request):
        body = await _json_body(request)
        world_id = body.get("world_id")
        if not isinstance(world_id, str):
            raise RequestError(400, "world_id must be a string")
        pose = _parse_pose(body.get("pose"))
        width = _parse_size(body, "width", state.width)
        height = _parse_size(body, "height", state.height)
        with state.lock:
            scene = state.worlds.get(world_id)
        if scene is None:
            raise RequestError(404, f"unknown world {world_id!r}")
        fb = render(scene, state.intrinsics(width, height), pose)
        return Response(content=png_bytes(fb.color), media_type="image/png")

    @app.post("/compare")
    async def compare(request: Request):
        body = await _json_body(request)
        pose = _parse_pose(body.get("pose"))
        width = _parse_size(body, "width", state.width)
        height = _parse_size(body, "height", state.height)
        with state.lock:
            left = state.worlds.get("coarse")
            right = state.worlds.get("refined", left)
        if left is None:
            raise RequestError(404, "no coarse world loaded to compare")
        intr = state.intrinsics(width, height)
        fb_l = render(left, intr, pose)
        fb_r = render(right, intr, pose)
        strip = np.concatenate([fb_l.color, fb_r.color], axis=1)
        return Response(content=png_bytes(strip), media_type="image/png")

    @app.post("/refine/start")
    async def refine_start(request: Request):
        body = await _json_body(request)
        restorer = body.get("restorer", "reproject")
        if restorer not in RESTORER_KINDS:
            raise RequestError(400, f"restorer must be one of {list(RESTORER_KINDS)}")
        iters = body.get("iters", 2)
        if not isinstance(iters, int) or isinstance(iters, bool) or not (1 <= iters <= 16):
            raise RequestError(400, "iters must be an integer in [1, 16]")
        trajectory = _job_trajectory(body, state)
        base = "coarse" if "coarse" in state.worlds else None
        if base is None:
            raise RequestError(404, "no coarse world loaded to refine")
        if restorer == "oracle" and "gt" not in state.worlds:
            raise RequestError(400, "oracle restorer needs a loaded gt world")

        with state.lock:
            if state.job.status == "running":
                raise RequestError(409, "a refine job is already running")
            job_id = uuid.uuid4().hex[:12]
            state.job = RefineJob(job_id=job_id, status="running", total_iters=iters)
        thread = threading.Thread(
            target=_run_refine_job, args=(state, base, trajectory, restorer, iters), daemon=True)
        state.thread = thread
        thread.start()
        return {"job_id": job_id}

    @app.get("/refine/status")
    def refine_status():
        with state.lock:
            job = state.job
            return {
                "job_id": job.job_id,
                "status": job.status,
                "progress": job.progress,
                "total_iters": job.total_iters,
                "report_tail": job.report_tail,
                "error": job.error,
            }

    @app.get("/metrics")
    def metrics_endpoint():
        with state.lock:
            gt = state.worlds.get("gt")
            candidates = [(wid, s) for wid, s in state.worlds.items() if wid != "gt"]
        if gt is None or not candidates:
            raise RequestError(404, "metrics need a gt world and at least one candidate")
        start = Pose(rot_y(0.0), np.array([0.0, 1.2, -0.62 * 10.0]))
        spec = TrajectorySpec(kind="forward", steps=8, step_length=0.45, start=start)
        report = evaluate_worlds(gt, candidates, [spec], state.intrinsics(64, 64),
                                 fan_n=state.fan_n, fan_delta=math.radians(state.fan_delta_deg))
        with state.lock:
            state.latest_report = report
        import json as _json

        return _json.loads(report.to_json())

    return app


def serve(port: int, scene_paths: list, host: str = "127.0.0.1",
          width: int = DEFAULT_RENDER_SIZE, height: int = DEFAULT_RENDER_SIZE) -> None:
    import uvicorn

    state = load_state(scene_paths, width=width, height=height)
    app = create_app(state)
    uvicorn.run(app, host=host, port=port, log_level="warning")
