"""Depth-based forward warping between views with a z-buffer occlusion test.

Used by the reprojection restorer (to fill masked pixels from neighboring
fan views) and by the cross-view consistency metric (to compare a view
against its neighbor warped into it).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, Pose


@dataclass
class WarpResult:
    color: np.ndarray  # (H, W, 3), undefined where hit == False
    depth: np.ndarray  # (H, W), z in the destination camera, inf where no hit
    hit: np.ndarray  # (H, W) bool


def backward_warp_sample(src_color: np.ndarray, src_depth: np.ndarray, src_valid: np.ndarray,
                         dst_depth: np.ndarray, dst_valid: np.ndarray,
                         src_pose: Pose, dst_pose: Pose, intr: CameraIntrinsics,
                         delta_d: float, near: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Sample the src view at each dst pixel's reprojected location (bilinear).

    Dst pixels unproject through their own depth, land in the src camera,
    and sample color there; the sample only counts when all four bilinear
    corners are valid src pixels and the bilinear src depth agrees with the
    reprojected depth within delta_d (occlusion test). Returns (sampled
    colors, valid mask) on the dst grid.
    """
    h, w = dst_depth.shape
    yy, xx = np.mgrid[0:h, 0:w]
    ok = np.asarray(dst_valid, dtype=bool) & (dst_depth > 0)

    z = dst_depth[ok]
    x_cam = (xx[ok] - intr.cx) / intr.fx * z
    y_cam = (yy[ok] - intr.cy) / intr.fy * z
    world = dst_pose.camera_to_world(np.stack([x_cam, y_cam, z], axis=1))
    pts_src = src_pose.world_to_camera(world)
    zs = pts_src[:, 2]
    front = zs > near

    u = np.full(zs.shape, -1.0)
    v = np.full(zs.shape, -1.0)
    u[front] = intr.fx * pts_src[front, 0] / zs[front] + intr.cx
    v[front] = intr.fy * pts_src[front, 1] / zs[front] + intr.cy
    inside = front & (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)

    sampled = np.zeros((h, w, 3))
    valid = np.zeros((h, w), dtype=bool)
    if not inside.any():
        return sampled, valid

    u, v, zs = u[inside], v[inside], zs[inside]
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fu = u - x0
    fv = v - y0

    src_ok = np.asarray(src_valid, dtype=bool) & (src_depth > 0)
    corners_ok = src_ok[y0, x0] & src_ok[y0, x1] & src_ok[y1, x0] & src_ok[y1, x1]

    w00 = (1 - fu) * (1 - fv)
    w01 = fu * (1 - fv)
    w10 = (1 - fu) * fv
    w11 = fu * fv
    col = (src_color[y0, x0] * w00[:, None] + src_color[y0, x1] * w01[:, None]
           + src_color[y1, x0] * w10[:, None] + src_color[y1, x1] * w11[:, None])
    dep = (src_depth[y0, x0] * w00 + src_depth[y0, x1] * w01
           + src_depth[y1, x0] * w10 + src_depth[y1, x1] * w11)
    good = corners_ok & (np.abs(dep - zs) <= delta_d)

    flat_ok = np.nonzero(ok.ravel())[0][inside]
    sampled.reshape(-1, 3)[flat_ok[good]] = col[good]
    valid.reshape(-1)[flat_ok[good]] = True
    return sampled, valid


def forward_warp(src_color: np.ndarray, src_depth: np.ndarray, src_valid: np.ndarray,
                 src_pose: Pose, dst_pose: Pose, intr: CameraIntrinsics,
                 near: float = 0.05) -> WarpResult:
    """Scatter src pixels into the dst view; nearest surface wins per pixel.

    src_valid marks source pixels whose color/depth are trustworthy. Ties in
    the z-buffer resolve by source pixel order, so the result is deterministic.
    """
    h, w = src_depth.shape
    yy, xx = np.mgrid[0:h, 0:w]
    valid = np.asarray(src_valid, dtype=bool) & (src_depth > 0)
    u = xx[valid].astype(np.float64)
    v = yy[valid].astype(np.float64)
    z = src_depth[valid]
    cols = src_color[valid]

    x_cam = (u - intr.cx) / intr.fx * z
    y_cam = (v - intr.cy) / intr.fy * z
    pts_world = src_pose.camera_to_world(np.stack([x_cam, y_cam, z], axis=1))
    pts_dst = dst_pose.world_to_camera(pts_world)

    zd = pts_dst[:, 2]
    front = zd > near
    pts_dst = pts_dst[front]
    cols = cols[front]
    zd = zd[front]

    ud = np.round(intr.fx * pts_dst[:, 0] / zd + intr.cx).astype(np.int64)
    vd = np.round(intr.fy * pts_dst[:, 1] / zd + intr.cy).astype(np.int64)
    inside = (ud >= 0) & (ud < w) & (vd >= 0) & (vd < h)
    ud, vd, zd, cols = ud[inside], vd[inside], zd[inside], cols[inside]

    out_color = np.zeros((h, w, 3))
    out_depth = np.full((h, w), np.inf)
    hit = np.zeros((h, w), dtype=bool)
    if zd.size == 0:
        return WarpResult(out_color, out_depth, hit)

    flat = vd * w + ud
    tiebreak = np.arange(zd.size)
    order = np.lexsort((tiebreak, zd, flat))  # by pixel, then depth, then source order
    flat_sorted = flat[order]
    first = np.ones(flat_sorted.size, dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    sel = order[first]

    out_color.reshape(-1, 3)[flat[sel]] = cols[sel]
    out_depth.reshape(-1)[flat[sel]] = zd[sel]
    hit.reshape(-1)[flat[sel]] = True
    return WarpResult(out_color, out_depth, hit)
