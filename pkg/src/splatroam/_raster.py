"""Numba kernels for front-to-back alpha compositing and its adjoint.

Splat arrays arrive pre-culled and pre-sorted by camera depth (ties broken
by splat index); rects are half-open pixel bounds already clipped to the
viewport. Kernels are single-threaded on purpose: compositing order is the
determinism contract.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def composite_forward(mean2, conic, opa, color, depth, rect, cutoff_q, alpha_clamp,
                      bg, out_color, out_t, out_depthw):
    m = mean2.shape[0]
    h, w_img = out_t.shape
    for i in range(m):
        x0 = rect[i, 0]
        y0 = rect[i, 1]
        x1 = rect[i, 2]
        y1 = rect[i, 3]
        a = conic[i, 0]
        b = conic[i, 1]
        c = conic[i, 2]
        mx = mean2[i, 0]
        my = mean2[i, 1]
        op = opa[i]
        c0 = color[i, 0]
        c1 = color[i, 1]
        c2 = color[i, 2]
        zi = depth[i]
        for y in range(y0, y1):
            dy = y - my
            for x in range(x0, x1):
                dx = x - mx
                q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
                if q > cutoff_q:
                    continue
                alpha = op * np.exp(-0.5 * q)
                if alpha > alpha_clamp:
                    alpha = alpha_clamp
                tv = out_t[y, x]
                wgt = alpha * tv
                out_color[y, x, 0] += wgt * c0
                out_color[y, x, 1] += wgt * c1
                out_color[y, x, 2] += wgt * c2
                out_depthw[y, x] += wgt * zi
                out_t[y, x] = tv - wgt
    for y in range(h):
        for x in range(w_img):
            tv = out_t[y, x]
            out_color[y, x, 0] += tv * bg[0]
            out_color[y, x, 1] += tv * bg[1]
            out_color[y, x, 2] += tv * bg[2]


@njit(cache=True)
def composite_backward(mean2, conic, opa, color, rect, cutoff_q, alpha_clamp,
                       dl_dc, t_run, s_run, g_mean2, g_conic, g_opa, g_color):
    """Adjoint of composite_forward for a photometric loss on the color plane.

    t_run enters as the final transmittance and is rolled back splat by
    splat; s_run enters as background * t_final (the per-pixel contribution
    of everything behind the splat being processed, background included).
    Gradients at the alpha clamp are zero, matching the forward clamp.
    """
    m = mean2.shape[0]
    for i in range(m - 1, -1, -1):
        x0 = rect[i, 0]
        y0 = rect[i, 1]
        x1 = rect[i, 2]
        y1 = rect[i, 3]
        a = conic[i, 0]
        b = conic[i, 1]
        c = conic[i, 2]
        mx = mean2[i, 0]
        my = mean2[i, 1]
        op = opa[i]
        c0 = color[i, 0]
        c1 = color[i, 1]
        c2 = color[i, 2]
        for y in range(y0, y1):
            dy = y - my
            for x in range(x0, x1):
                dx = x - mx
                q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
                if q > cutoff_q:
                    continue
                g = np.exp(-0.5 * q)
                alpha = op * g
                clamped = alpha > alpha_clamp
                if clamped:
                    alpha = alpha_clamp
                one_m = 1.0 - alpha
                t_i = t_run[y, x] / one_m
                wgt = alpha * t_i
                d0 = dl_dc[y, x, 0]
                d1 = dl_dc[y, x, 1]
                d2 = dl_dc[y, x, 2]
                g_color[i, 0] += d0 * wgt
                g_color[i, 1] += d1 * wgt
                g_color[i, 2] += d2 * wgt
                dalpha = (d0 * (c0 * t_i - s_run[y, x, 0] / one_m)
                          + d1 * (c1 * t_i - s_run[y, x, 1] / one_m)
                          + d2 * (c2 * t_i - s_run[y, x, 2] / one_m))
                if not clamped:
                    g_opa[i] += dalpha * g
                    dq = dalpha * op * (-0.5 * g)
                    g_mean2[i, 0] -= dq * 2.0 * (a * dx + b * dy)
                    g_mean2[i, 1] -= dq * 2.0 * (b * dx + c * dy)
                    g_conic[i, 0] += dq * dx * dx
                    g_conic[i, 1] += dq * 2.0 * dx * dy
                    g_conic[i, 2] += dq * dy * dy
                s_run[y, x, 0] += c0 * wgt
                s_run[y, x, 1] += c1 * wgt
                s_run[y, x, 2] += c2 * wgt
                t_run[y, x] = t_i
