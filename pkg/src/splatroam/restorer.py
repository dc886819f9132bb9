"""Restoration of degraded fan-view clips.

The restoration contract is a seam for a learned video model: stitched
masked frames in, fully trusted frames out. Two concrete restorers live
here: an oracle that peeks at ground truth (upper bound for validating the
refinement loop) and a classical multi-view restorer that fills masked
pixels by depth reprojection from neighboring fan views, falling back to
pull-push diffusion for pixels no view can see. An identity passthrough
serves as the no-restoration ablation baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import CameraIntrinsics, Pose, fan_poses
from .multiview import MultiViewClip, UnifiedClip, clip_coverage_masks, stitch, unstitch
from .warp import forward_warp

RESTORER_KINDS = ("oracle", "reproject", "identity")


@dataclass(frozen=True)
class RestoreOptions:
    """Knobs of the reprojection restorer.

    delta_d is the absolute depth-agreement tolerance of the occlusion test
    (defaults to 2% of the scene extent when built through make_restore_input);
    sigma_theta scales the angular-proximity blending (defaults to the fan step).
    Pixels with alpha in [tau_alpha, tau_trust) count as soft: kept but blended
    half-and-half with reprojected evidence when some exists.
    """

    delta_d: float = 0.2
    sigma_theta: float = math.radians(30.0)
    tau_alpha: float = 0.5
    tau_trust: float = 0.9
    soft_blend: float = 0.5
    oracle_beta: float = 0.0  # GT share blended into unmasked pixels by the oracle
    time_window: int = 2  # path steps on each side usable as warp sources
    # temporal sources carry small parallax and are weighted above the
    # yawed-view sources wherever both exist
    time_decay: float = 0.35  # candidate weight exp(-|dt| * time_decay)


@dataclass
class RestoreInput:
    """Stitched masked frames plus the per-view geometry needed to reproject."""

    unified: UnifiedClip
    raw_color: np.ndarray  # (T, K, H, W, 3) degraded colors before sentinel fill
    depths: np.ndarray  # (T, K, H, W)
    alphas: np.ndarray  # (T, K, H, W)
    n: int
    delta_theta: float
    path: tuple[Pose, ...]
    intrinsics: CameraIntrinsics
    options: RestoreOptions = field(default_factory=RestoreOptions)

    def __post_init__(self):
        k = 2 * self.n + 1
        if self.unified.k != k:
            raise ValueError(f"unified K={self.unified.k} but fan n={self.n} implies {k}")
        if self.depths.shape != self.alphas.shape or self.depths.shape[:2] != (self.unified.steps, k):
            raise ValueError("aux planes do not match the unified clip")


@dataclass
class RestoreStats:
    filled_per_frame: list[int] = field(default_factory=list)
    pullpush_per_frame: list[int] = field(default_factory=list)
    seam_residuals: list[float] = field(default_factory=list)
    all_masked_frames: list[int] = field(default_factory=list)


@dataclass
class RestoreResult:
    unified_restored: UnifiedClip
    stats: RestoreStats


def make_restore_input(clip: MultiViewClip, masks: np.ndarray | None = None,
                       options: RestoreOptions | None = None,
                       scene_extent: float | None = None,
                       provenance: str = "",
                       **option_overrides) -> RestoreInput:
    """Bundle a rendered clip into the restoration contract.

    Masks default to the coverage masks of the clip; masked pixels are
    sentinel-zeroed in the stitched frames, exactly what a conditioned
    restorer would receive. Keyword overrides patch individual fields of
    the derived RestoreOptions (e.g. soft_blend=0).
    """
    if clip.intrinsics is None:
        raise ValueError("clip carries no intrinsics")
    opts = options or RestoreOptions()
    if options is None:
        opts = replace(opts, sigma_theta=max(clip.delta_theta, 1e-6))
        if scene_extent is not None:
            opts = replace(opts, delta_d=0.02 * scene_extent)
    if option_overrides:
        opts = replace(opts, **option_overrides)
    if masks is None:
        masks = clip_coverage_masks(clip, opts.tau_alpha)
    masks = np.asarray(masks, dtype=np.uint8)
    masked_color = clip.color * (1 - masks[..., None])
    masked_clip = MultiViewClip(color=masked_color, depth=clip.depth, alpha=clip.alpha,
                                n=clip.n, delta_theta=clip.delta_theta, path=clip.path,
                                intrinsics=clip.intrinsics)
    unified = stitch(masked_clip, masks, provenance=provenance)
    return RestoreInput(
        unified=unified,
        raw_color=clip.color.copy(),
        depths=clip.depth.copy(),
        alphas=clip.alpha.copy(),
        n=clip.n,
        delta_theta=clip.delta_theta,
        path=clip.path,
        intrinsics=clip.intrinsics,
        options=opts,
    )


def pull_push_fill(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Classic pull-push: average trusted pixels down to a 1x1 apex, then fill
    invalid pixels on the way back up. Trusted pixels are untouched.

    A fully masked image fills with 0.5 gray (no evidence at all).
    """
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask)
    if mask.shape != image.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} != image shape {image.shape[:2]}")
    flat_gray = image.ndim == 2
    img = image[:, :, None] if flat_gray else image
    w = (1.0 - mask.astype(np.float64))
    if w.sum() == 0:
        out = np.full_like(img, 0.5)
        return out[:, :, 0] if flat_gray else out

    # pull: validity-weighted 2x2 averages down to 1x1
    levels = [(img * w[:, :, None], w)]
    ch, cw = img.shape[:2]
    cur_c, cur_w = levels[0]
    while ch > 1 or cw > 1:
        ph, pw = ch + (ch & 1), cw + (cw & 1)
        pc = np.zeros((ph, pw, img.shape[2]))
        pwt = np.zeros((ph, pw))
        pc[:ch, :cw] = cur_c
        pwt[:ch, :cw] = cur_w
        nh, nw = ph // 2, pw // 2
        wsum = pwt.reshape(nh, 2, nw, 2).sum(axis=(1, 3))
        csum = pc.reshape(nh, 2, nw, 2, -1).sum(axis=(1, 3))
        next_w = wsum / 4.0
        next_c = np.zeros_like(csum)
        nz = wsum > 0
        next_c[nz] = csum[nz] / wsum[nz, None]
        levels.append((next_c * next_w[:, :, None], next_w))
        cur_c, cur_w = next_c * next_w[:, :, None], next_w
        ch, cw = nh, nw

    # push: fill zero-validity cells from the coarser level, nearest upsample
    coarse_c, coarse_w = levels[-1]
    coarse = np.zeros_like(coarse_c)
    nzw = coarse_w > 0
    coarse[nzw] = coarse_c[nzw] / coarse_w[nzw, None]
    for level_c, level_w in reversed(levels[:-1]):
        lh, lw = level_w.shape
        up = np.repeat(np.repeat(coarse, 2, axis=0), 2, axis=1)[:lh, :lw]
        vals = np.zeros_like(level_c)
        nzw = level_w > 0
        vals[nzw] = level_c[nzw] / level_w[nzw, None]
        vals[~nzw] = up[~nzw]
        coarse = vals

    out = img.copy()
    invalid = mask.astype(bool)
    out[invalid] = coarse[invalid]
    return out[:, :, 0] if flat_gray else out


def oracle_restore(inp: RestoreInput, gt_clip: np.ndarray) -> RestoreResult:
    """Ground-truth-peeking restorer: masked pixels copy GT, unmasked pixels
    blend options.oracle_beta of GT (0 by default, i.e. pass through)."""
    gt_clip = np.asarray(gt_clip, dtype=np.float64)
    if gt_clip.shape != inp.raw_color.shape:
        raise ValueError(f"GT clip shape {gt_clip.shape} does not match input {inp.raw_color.shape}")
    _, masks = unstitch(inp.unified)
    beta = inp.options.oracle_beta
    unmasked = beta * gt_clip + (1.0 - beta) * inp.raw_color
    restored = np.where(masks[..., None].astype(bool), gt_clip, unmasked)
    stats = RestoreStats(
        filled_per_frame=[int(masks[t].sum()) for t in range(masks.shape[0])],
        pullpush_per_frame=[0] * masks.shape[0],
    )
    return _finish(inp, restored, stats)


def identity_restore(inp: RestoreInput) -> RestoreResult:
    """No-op ablation baseline: the degraded frames pass through untouched."""
    stats = RestoreStats(filled_per_frame=[0] * inp.unified.steps,
                         pullpush_per_frame=[0] * inp.unified.steps)
    return _finish(inp, inp.raw_color.copy(), stats)


def reproject_restore(inp: RestoreInput) -> RestoreResult:
    """Fill masked pixels via depth reprojection from warp sources.

    Sources for a target view are its fan neighbors at the same time step
    plus the same view at nearby path steps (a single-view clip still has
    the temporal sources). The nearest surviving surface wins the occlusion
    test within delta_d; candidates blend with proximity weights (angular
    across views, exponential in step distance across time). Soft pixels
    (alpha between tau_alpha and tau_trust) mix half-and-half with the
    evidence. Pixels no source can see go to pull-push on the stitched
    frame, which fills across seams from both sides.
    """
    opts = inp.options
    intr = inp.intrinsics
    if inp.depths is None:
        raise ValueError("reprojection needs per-view depth planes")
    colors, masks = unstitch(inp.unified)
    t_steps, k = colors.shape[:2]
    offsets = (np.arange(k) - inp.n) * inp.delta_theta
    fans = [fan_poses(p, inp.n, inp.delta_theta) for p in inp.path]

    restored = np.empty_like(inp.raw_color)
    stats = RestoreStats()
    for t in range(t_steps):
        fan = fans[t]
        views = []
        filled = 0
        for tgt in range(k):
            raw = inp.raw_color[t, tgt]
            alpha = inp.alphas[t, tgt]
            mask = masks[t, tgt].astype(bool)
            acc = np.zeros_like(raw)
            wacc = np.zeros(raw.shape[:2])
            zmin = np.full(raw.shape[:2], np.inf)

            sources = [(t, src, math.exp(-abs(offsets[src] - offsets[tgt]) / max(opts.sigma_theta, 1e-9)))
                       for src in range(k) if src != tgt]
            for dt in range(1, opts.time_window + 1):
                for ts in (t - dt, t + dt):
                    if 0 <= ts < t_steps:
                        sources.append((ts, tgt, math.exp(-dt * opts.time_decay)))

            warps = []
            for ts, src, wgt in sources:
                src_valid = (~masks[ts, src].astype(bool)) & (inp.alphas[ts, src] >= opts.tau_trust)
                res = forward_warp(inp.raw_color[ts, src], inp.depths[ts, src], src_valid,
                                   fans[ts].poses[src], fan.poses[tgt], intr)
                warps.append((wgt, res))
                np.minimum(zmin, res.depth, out=zmin)
            for wgt, res in warps:
                ok = res.hit & (res.depth <= zmin + opts.delta_d)
                acc[ok] += wgt * res.color[ok]
                wacc[ok] += wgt
            evidence = wacc > 0
            reproj = np.zeros_like(raw)
            reproj[evidence] = acc[evidence] / wacc[evidence, None]

            out = raw.copy()
            fill_now = mask & evidence
            out[fill_now] = reproj[fill_now]
            soft = (~mask) & (alpha >= opts.tau_alpha) & (alpha < opts.tau_trust) & evidence
            out[soft] = opts.soft_blend * reproj[soft] + (1.0 - opts.soft_blend) * raw[soft]
            remaining = mask & ~evidence
            filled += int(fill_now.sum())
            views.append((out, remaining))

        frame_color = np.stack([v[0] for v in views])
        frame_rem = np.stack([v[1] for v in views])
        stats.filled_per_frame.append(filled + int(frame_rem.sum()))
        stats.pullpush_per_frame.append(int(frame_rem.sum()))
        if frame_rem.any():
            # stitched pull-push so seams fill from both sides
            h, w = frame_color.shape[1:3]
            strip = np.moveaxis(frame_color, 0, 1).reshape(h, k * w, 3)
            strip_mask = np.moveaxis(frame_rem, 0, 1).reshape(h, k * w)
            if strip_mask.all():
                stats.all_masked_frames.append(t)
            strip = pull_push_fill(strip, strip_mask)
            frame_color = np.moveaxis(strip.reshape(h, k, w, 3), 1, 0)
        restored[t] = frame_color
    return _finish(inp, restored, stats)


def _finish(inp: RestoreInput, restored: np.ndarray, stats: RestoreStats) -> RestoreResult:
    t, k, h, w = restored.shape[:4]
    color = np.ascontiguousarray(np.moveaxis(restored, 1, 2)).reshape(t, h, k * w, 3)
    unified = UnifiedClip(color=color, mask=np.zeros((t, h, k * w), dtype=np.uint8),
                          k=k, provenance=inp.unified.provenance)
    for b in range(1, k):
        seam = b * w
        stats.seam_residuals.append(float(np.abs(color[:, :, seam] - color[:, :, seam - 1]).mean()))
    return RestoreResult(unified_restored=unified, stats=stats)


def restore(inp: RestoreInput, kind: str, gt_clip: np.ndarray | None = None) -> RestoreResult:
    """Dispatch to a concrete restorer; a learned model would plug in here."""
    if kind == "oracle":
        if gt_clip is None:
            raise ValueError("oracle restorer needs an aligned ground-truth clip")
        return oracle_restore(inp, gt_clip)
    if kind == "reproject":
        return reproject_restore(inp)
    if kind == "identity":
        return identity_restore(inp)
    raise ValueError(f"unknown restorer kind {kind!r}; expected one of {RESTORER_KINDS}")


def restore_per_view(inp: RestoreInput, kind: str, gt_clip: np.ndarray | None = None) -> RestoreResult:
    """Ablation path: restore every view as its own single-view clip.

    The restorer sees one view's sequence at a time (temporal warp sources
    remain, fan neighbors and the stitched fill do not), then the outputs
    reassemble into the unified layout.
    """
    colors, masks = unstitch(inp.unified)
    t_steps, k, h, w = colors.shape[:4]
    restored = np.empty_like(inp.raw_color)
    stats = RestoreStats(filled_per_frame=[0] * t_steps, pullpush_per_frame=[0] * t_steps)
    for view in range(k):
        single = UnifiedClip(color=colors[:, view].copy(), mask=masks[:, view].copy(),
                             k=1, provenance=inp.unified.provenance)
        sub = RestoreInput(
            unified=single,
            raw_color=inp.raw_color[:, view:view + 1].copy(),
            depths=inp.depths[:, view:view + 1].copy(),
            alphas=inp.alphas[:, view:view + 1].copy(),
            n=0,
            delta_theta=inp.delta_theta,
            path=tuple(fan_poses(p, inp.n, inp.delta_theta).poses[view] for p in inp.path),
            intrinsics=inp.intrinsics,
            options=inp.options,
        )
        res = restore(sub, kind, gt_clip[:, view:view + 1] if gt_clip is not None else None)
        out_colors, _ = unstitch(res.unified_restored)
        restored[:, view] = out_colors[:, 0]
        for t in range(t_steps):
            stats.filled_per_frame[t] += res.stats.filled_per_frame[t]
            stats.pullpush_per_frame[t] += res.stats.pullpush_per_frame[t]
    return _finish(inp, restored, stats)
