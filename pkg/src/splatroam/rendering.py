"""Differentiable forward splatting and analytic gradients of a photometric loss.

The forward pass projects each splat to a screen-space Gaussian (EWA-style:
2D covariance J W Sigma W^T J^T plus an isotropic blur), composites
front-to-back in camera-depth order, and records color, alpha-weighted
expected depth, and accumulated alpha. The backward pass follows the exact
forward computation: same culling, same support cutoff, zero gradient at
the alpha clamp, quaternion gradients projected through normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _raster
from .geometry import CameraIntrinsics, Pose
from .scene import SplatScene, sigmoid


@dataclass(frozen=True)
class RasterSettings:
    """Rasterizer knobs; defaults are the package-wide contract.

    cutoff_sigma bounds each splat's support in Mahalanobis units. It is
    deliberately wide (6 sigma): the truncation jump there is e^-18, below
    what central finite differences at eps=1e-4 can resolve, so gradient
    checks see a smooth function.
    """

    near: float = 0.05
    blur_px2: float = 0.3
    alpha_clamp: float = 0.99
    cutoff_sigma: float = 6.0
    cond_max: float = 1e12
    coverage_eps: float = 1e-6


DEFAULT_SETTINGS = RasterSettings()


@dataclass
class FrameBuffer:
    """Rendered planes: color (H,W,3) in [0,1], expected depth, accumulated alpha."""

    color: np.ndarray
    depth: np.ndarray
    alpha: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.color.shape[0], self.color.shape[1]


@dataclass
class RenderStats:
    total: int = 0
    culled_near: int = 0
    skipped_degenerate: int = 0
    drawn: int = 0


@dataclass
class SplatGradients:
    """Per-splat partials of a scalar loss; zero rows for splats never rasterized."""

    centers: np.ndarray
    log_scales: np.ndarray
    quaternions: np.ndarray
    colors: np.ndarray
    opacity_logits: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SplatGradients":
        return cls(
            centers=np.zeros((n, 3)),
            log_scales=np.zeros((n, 3)),
            quaternions=np.zeros((n, 4)),
            colors=np.zeros((n, 3)),
            opacity_logits=np.zeros(n),
        )

    def add_scaled(self, other: "SplatGradients", scale: float) -> None:
        self.centers += scale * other.centers
        self.log_scales += scale * other.log_scales
        self.quaternions += scale * other.quaternions
        self.colors += scale * other.colors
        self.opacity_logits += scale * other.opacity_logits


class _Projected:
    """Intermediates of the projection chain for the splats that rasterize."""

    __slots__ = (
        "idx", "order_idx", "t", "j", "m3", "r3", "qhat", "qnorm", "e2s",
        "mean2", "conic", "rect", "depth", "opa", "color", "w_mat", "stats",
    )


def _project_scene(scene: SplatScene, intr: CameraIntrinsics, pose: Pose,
                   settings: RasterSettings) -> _Projected:
    n = scene.num_splats
    stats = RenderStats(total=n)
    p = _Projected()
    p.stats = stats
    w_mat = pose.rotation.T
    p.w_mat = w_mat

    t_all = (scene.centers - pose.translation) @ pose.rotation  # (N,3) camera frame
    # a splat whose 3-sigma extent straddles the near plane cannot be
    # projected stably (the affine Jacobian blows up), so it is culled along
    # with everything behind the plane
    sigma_max = np.exp(scene.log_scales.max(axis=1))
    vis = t_all[:, 2] - 3.0 * sigma_max > settings.near
    stats.culled_near = int(n - vis.sum())
    idx = np.nonzero(vis)[0]
    if idx.size == 0:
        p.idx = idx
        return p

    t = t_all[idx]
    quats = scene.quaternions[idx]
    qnorm = np.linalg.norm(quats, axis=1)
    qhat = quats / qnorm[:, None]
    w, x, y, z = qhat.T
    r3 = np.empty((idx.size, 3, 3))
    r3[:, 0, 0] = 1 - 2 * (y * y + z * z)
    r3[:, 0, 1] = 2 * (x * y - w * z)
    r3[:, 0, 2] = 2 * (x * z + w * y)
    r3[:, 1, 0] = 2 * (x * y + w * z)
    r3[:, 1, 1] = 1 - 2 * (x * x + z * z)
    r3[:, 1, 2] = 2 * (y * z - w * x)
    r3[:, 2, 0] = 2 * (x * z - w * y)
    r3[:, 2, 1] = 2 * (y * z + w * x)
    r3[:, 2, 2] = 1 - 2 * (x * x + y * y)

    e2s = np.exp(2.0 * scene.log_scales[idx])
    cov3 = np.einsum("nij,nj,nkj->nik", r3, e2s, r3)
    m3 = np.einsum("ij,njk,lk->nil", w_mat, cov3, w_mat)

    fx, fy = intr.fx, intr.fy
    tx, ty, tz = t.T
    j = np.zeros((idx.size, 2, 3))
    j[:, 0, 0] = fx / tz
    j[:, 0, 2] = -fx * tx / (tz * tz)
    j[:, 1, 1] = fy / tz
    j[:, 1, 2] = -fy * ty / (tz * tz)

    cov2 = np.einsum("nij,njk,nlk->nil", j, m3, j)
    cov2[:, 0, 0] += settings.blur_px2
    cov2[:, 1, 1] += settings.blur_px2

    a = cov2[:, 0, 0]
    b = cov2[:, 0, 1]
    c = cov2[:, 1, 1]
    det = a * c - b * b
    mid = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(0.0, (0.5 * (a - c)) ** 2 + b * b))
    lam1 = mid + disc
    lam2 = mid - disc
    ok = (lam2 > 0) & (det > 0) & (lam1 <= settings.cond_max * lam2)
    stats.skipped_degenerate = int(idx.size - ok.sum())

    mean2 = np.stack([fx * tx / tz + intr.cx, fy * ty / tz + intr.cy], axis=1)
    radius = settings.cutoff_sigma * np.sqrt(np.maximum(lam1, 0.0))
    x0 = np.clip(np.ceil(mean2[:, 0] - radius), 0, intr.width).astype(np.int64)
    x1 = np.clip(np.floor(mean2[:, 0] + radius) + 1, 0, intr.width).astype(np.int64)
    y0 = np.clip(np.ceil(mean2[:, 1] - radius), 0, intr.height).astype(np.int64)
    y1 = np.clip(np.floor(mean2[:, 1] + radius) + 1, 0, intr.height).astype(np.int64)
    nonempty = (x1 > x0) & (y1 > y0)

    keep = ok & nonempty
    klocal = np.nonzero(keep)[0]
    stats.drawn = int(klocal.size)

    order = np.lexsort((idx[klocal], tz[klocal]))
    sel = klocal[order]

    p.idx = idx
    p.order_idx = idx[sel]  # global splat ids in draw order
    p.t = t[sel]
    p.j = np.ascontiguousarray(j[sel])
    p.m3 = np.ascontiguousarray(m3[sel])
    p.r3 = np.ascontiguousarray(r3[sel])
    p.qhat = qhat[sel]
    p.qnorm = qnorm[sel]
    p.e2s = e2s[sel]
    p.mean2 = np.ascontiguousarray(mean2[sel])
    inv_det = 1.0 / det[sel]
    p.conic = np.ascontiguousarray(np.stack([c[sel] * inv_det, -b[sel] * inv_det, a[sel] * inv_det], axis=1))
    p.rect = np.ascontiguousarray(np.stack([x0[sel], y0[sel], x1[sel], y1[sel]], axis=1))
    p.depth = np.ascontiguousarray(tz[sel])
    p.opa = np.ascontiguousarray(sigmoid(scene.opacity_logits[p.order_idx]))
    p.color = np.ascontiguousarray(scene.colors[p.order_idx])
    return p


def _composite(p: _Projected, intr: CameraIntrinsics, background: np.ndarray,
               settings: RasterSettings):
    h, w = intr.height, intr.width
    out_color = np.zeros((h, w, 3))
    out_t = np.ones((h, w))
    out_depthw = np.zeros((h, w))
    bg = np.ascontiguousarray(background, dtype=np.float64)
    if p.idx.size and p.order_idx.size:
        _raster.composite_forward(
            p.mean2, p.conic, p.opa, p.color, p.depth, p.rect,
            settings.cutoff_sigma ** 2, settings.alpha_clamp, bg,
            out_color, out_t, out_depthw,
        )
    else:
        out_color += bg
    return out_color, out_t, out_depthw


def render_full(scene: SplatScene, intr: CameraIntrinsics, pose: Pose,
                settings: RasterSettings = DEFAULT_SETTINGS) -> tuple[FrameBuffer, RenderStats]:
    """Render and also report culling/skip counts."""
    p = _project_scene(scene, intr, pose, settings)
    out_color, out_t, out_depthw = _composite(p, intr, scene.background, settings)
    alpha = 1.0 - out_t
    covered = alpha >= settings.coverage_eps
    depth = np.zeros_like(out_depthw)
    np.divide(out_depthw, alpha, out=depth, where=covered)
    fb = FrameBuffer(color=np.clip(out_color, 0.0, 1.0), depth=depth, alpha=alpha)
    return fb, p.stats


def render(scene: SplatScene, intr: CameraIntrinsics, pose: Pose,
           settings: RasterSettings = DEFAULT_SETTINGS) -> FrameBuffer:
    return render_full(scene, intr, pose, settings)[0]


def photometric_loss(rendered, target: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean squared color error over supervised pixels (mask 1 = supervise)."""
    color = rendered.color if isinstance(rendered, FrameBuffer) else np.asarray(rendered)
    target = np.asarray(target, dtype=np.float64)
    if color.shape != target.shape:
        raise ValueError(f"rendered shape {color.shape} != target shape {target.shape}")
    if mask is None:
        mask = np.ones(color.shape[:2], dtype=bool)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != color.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} != image shape {color.shape[:2]}")
    n_sup = int(mask.sum())
    if n_sup == 0:
        raise ValueError("photometric loss undefined: mask supervises zero pixels")
    diff = (color - target)[mask]
    return float(np.mean(diff * diff))


def backward(scene: SplatScene, intr: CameraIntrinsics, pose: Pose,
             target: np.ndarray, mask: np.ndarray | None = None,
             settings: RasterSettings = DEFAULT_SETTINGS) -> tuple[float, SplatGradients]:
    """Loss and analytic per-splat gradients along the exact forward computation."""
    target = np.asarray(target, dtype=np.float64)
    if mask is None:
        mask = np.ones((intr.height, intr.width), dtype=bool)
    mask = np.asarray(mask).astype(bool)
    n_sup = int(mask.sum())
    if n_sup == 0:
        raise ValueError("photometric loss undefined: mask supervises zero pixels")

    p = _project_scene(scene, intr, pose, settings)
    out_color, out_t, _ = _composite(p, intr, scene.background, settings)

    diff = (out_color - target) * mask[:, :, None]
    loss = float(np.sum(diff * diff) / (3.0 * n_sup))
    grads = SplatGradients.zeros(scene.num_splats)
    if p.idx.size == 0 or p.order_idx.size == 0:
        return loss, grads

    dl_dc = np.ascontiguousarray(2.0 * diff / (3.0 * n_sup))
    m = p.order_idx.size
    g_mean2 = np.zeros((m, 2))
    g_conic = np.zeros((m, 3))
    g_opa = np.zeros(m)
    g_color = np.zeros((m, 3))
    t_run = out_t.copy()
    s_run = np.ascontiguousarray(out_t[:, :, None] * scene.background[None, None, :])
    _raster.composite_backward(
        p.mean2, p.conic, p.opa, p.color, p.rect,
        settings.cutoff_sigma ** 2, settings.alpha_clamp,
        dl_dc, t_run, s_run, g_mean2, g_conic, g_opa, g_color,
    )

    # conic (packed inverse covariance) -> 2D covariance
    a = p.conic[:, 0]
    b = p.conic[:, 1]
    c = p.conic[:, 2]
    a_full = np.empty((m, 2, 2))
    a_full[:, 0, 0] = a
    a_full[:, 0, 1] = b
    a_full[:, 1, 0] = b
    a_full[:, 1, 1] = c
    g_a_full = np.empty((m, 2, 2))
    g_a_full[:, 0, 0] = g_conic[:, 0]
    g_a_full[:, 0, 1] = 0.5 * g_conic[:, 1]
    g_a_full[:, 1, 0] = 0.5 * g_conic[:, 1]
    g_a_full[:, 1, 1] = g_conic[:, 2]
    g_cov2 = -np.einsum("mij,mjk,mkl->mil", a_full, g_a_full, a_full)

    # cov2 = J M3 J^T + blur I
    g_j = 2.0 * np.einsum("mij,mjk,mkl->mil", g_cov2, p.j, p.m3)
    g_m3 = np.einsum("mji,mjk,mkl->mil", p.j, g_cov2, p.j)
    g_cov3 = np.einsum("ji,mjk,kl->mil", p.w_mat, g_m3, p.w_mat)

    # screen mean and J both depend on the camera-space center t
    fx, fy = intr.fx, intr.fy
    tx, ty, tz = p.t.T
    inv_z2 = 1.0 / (tz * tz)
    inv_z3 = inv_z2 / tz
    g_t = np.einsum("mi,mij->mj", g_mean2, p.j)
    g_t[:, 0] += g_j[:, 0, 2] * (-fx * inv_z2)
    g_t[:, 1] += g_j[:, 1, 2] * (-fy * inv_z2)
    g_t[:, 2] += (g_j[:, 0, 0] * (-fx * inv_z2)
                  + g_j[:, 0, 2] * (2.0 * fx * tx * inv_z3)
                  + g_j[:, 1, 1] * (-fy * inv_z2)
                  + g_j[:, 1, 2] * (2.0 * fy * ty * inv_z3))
    g_center = np.einsum("mi,ij->mj", g_t, p.w_mat)

    # cov3 = R diag(e^{2s}) R^T
    g_log_scale = 2.0 * p.e2s * np.einsum("mik,mij,mjk->mk", p.r3, g_cov3, p.r3)
    g_r = 2.0 * np.einsum("mij,mjk,mk->mik", g_cov3, p.r3, p.e2s)

    w, x, y, z = p.qhat.T
    zero = np.zeros(m)
    dr_dw = 2.0 * np.stack([
        np.stack([zero, -z, y], axis=1),
        np.stack([z, zero, -x], axis=1),
        np.stack([-y, x, zero], axis=1),
    ], axis=1)
    dr_dx = 2.0 * np.stack([
        np.stack([zero, y, z], axis=1),
        np.stack([y, -2 * x, -w], axis=1),
        np.stack([z, w, -2 * x], axis=1),
    ], axis=1)
    dr_dy = 2.0 * np.stack([
        np.stack([-2 * y, x, w], axis=1),
        np.stack([x, zero, z], axis=1),
        np.stack([-w, z, -2 * y], axis=1),
    ], axis=1)
    dr_dz = 2.0 * np.stack([
        np.stack([-2 * z, -w, x], axis=1),
        np.stack([w, -2 * z, y], axis=1),
        np.stack([x, y, zero], axis=1),
    ], axis=1)
    g_qhat = np.stack([
        np.einsum("mik,mik->m", g_r, dr_dw),
        np.einsum("mik,mik->m", g_r, dr_dx),
        np.einsum("mik,mik->m", g_r, dr_dy),
        np.einsum("mik,mik->m", g_r, dr_dz),
    ], axis=1)
    radial = np.einsum("mi,mi->m", g_qhat, p.qhat)
    g_quat = (g_qhat - radial[:, None] * p.qhat) / p.qnorm[:, None]

    g_opacity = g_opa * p.opa * (1.0 - p.opa)

    ids = p.order_idx
    grads.centers[ids] = g_center
    grads.log_scales[ids] = g_log_scale
    grads.quaternions[ids] = g_quat
    grads.colors[ids] = g_color
    grads.opacity_logits[ids] = g_opacity
    return loss, grads
