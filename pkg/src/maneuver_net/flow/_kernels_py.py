"""Vectorised numpy versions of the polynomial-expansion flow kernels.

Same signatures and float64 semantics as the compiled ``_kernels`` module;
used when the extension is not built or ``MANEUVER_NET_PURE_PYTHON`` is set.
"""

import numpy as np

_BORDER = np.array([0.14, 0.14, 0.4472, 0.4472, 0.4472])


def gaussian_basis(n, sigma):
    """Applicability weights and the inverse-Gram constants for a (2n+1)^2 window.

    Returns ``(g, xg, xxg, ig11, ig03, ig33, ig55)``.
    """
    if sigma < 1.1920929e-07:
        sigma = n * 0.3
    x = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-x * x / (2.0 * sigma * sigma))
    g /= g.sum()
    xg = x * g
    xxg = x * x * g

    # Gram matrix of the quadratic basis (1, x, y, x^2, y^2, xy) under g(x)g(y)
    G = np.zeros((6, 6))
    gy, gx = np.meshgrid(g, g, indexing="ij")
    yy, xx = np.meshgrid(x, x, indexing="ij")
    w = gy * gx
    G[0, 0] = w.sum()
    G[1, 1] = (w * xx**2).sum()
    G[3, 3] = (w * xx**4).sum()
    G[5, 5] = (w * xx**2 * yy**2).sum()
    G[2, 2] = G[0, 3] = G[0, 4] = G[3, 0] = G[4, 0] = G[1, 1]
    G[4, 4] = G[3, 3]
    G[3, 4] = G[4, 3] = G[5, 5]
    iG = np.linalg.inv(G)
    return g, xg, xxg, iG[1, 1], iG[0, 3], iG[3, 3], iG[5, 5]


def _taps(padded, weights, axis, n, size):
    out = np.zeros(padded.shape[:axis] + (size,) + padded.shape[axis + 1 :])
    for i, w in enumerate(weights):
        out += w * np.take(padded, np.arange(i, i + size), axis=axis)
    return out


def poly_exp(img, n, sigma):
    """Per-pixel quadratic fit; channels (ry, rx, ryy, rxx, rxy)."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    H, W = img.shape
    g, xg, xxg, ig11, ig03, ig33, ig55 = gaussian_basis(n, sigma)

    P = np.pad(img, ((n, n), (0, 0)), mode="edge")
    v0 = _taps(P, g, 0, n, H)
    v1 = _taps(P, xg, 0, n, H)
    v2 = _taps(P, xxg, 0, n, H)

    def horiz(arr, weights):
        return _taps(np.pad(arr, ((0, 0), (n, n)), mode="edge"), weights, 1, n, W)

    b1 = horiz(v0, g)
    b2 = horiz(v0, xg)
    b3 = horiz(v1, g)
    b4 = horiz(v0, xxg)
    b5 = horiz(v2, g)
    b6 = horiz(v1, xg)

    R = np.empty((H, W, 5))
    R[..., 0] = b3 * ig11
    R[..., 1] = b2 * ig11
    R[..., 2] = b1 * ig03 + b5 * ig33
    R[..., 3] = b1 * ig03 + b4 * ig33
    R[..., 4] = b6 * ig55
    return R


def update_matrices(R0, R1, flow):
    """Normal-equation terms (G11, G12, G22, h1, h2) for the current flow."""
    H, W = flow.shape[:2]
    ys, xs = np.mgrid[0:H, 0:W]
    dx = flow[..., 0]
    dy = flow[..., 1]
    fx = xs + dx
    fy = ys + dy
    x1 = np.floor(fx).astype(np.int64)
    y1 = np.floor(fy).astype(np.int64)
    fx -= x1
    fy -= y1
    inside = (x1 >= 0) & (x1 < W - 1) & (y1 >= 0) & (y1 < H - 1)

    xc = np.clip(x1, 0, W - 2)
    yc = np.clip(y1, 0, H - 2)
    a00 = ((1 - fx) * (1 - fy))[..., None]
    a01 = (fx * (1 - fy))[..., None]
    a10 = ((1 - fx) * fy)[..., None]
    a11 = (fx * fy)[..., None]
    warped = (
        a00 * R1[yc, xc] + a01 * R1[yc, xc + 1] + a10 * R1[yc + 1, xc] + a11 * R1[yc + 1, xc + 1]
    )

    r2 = np.where(inside, warped[..., 0], 0.0)
    r3 = np.where(inside, warped[..., 1], 0.0)
    r4 = np.where(inside, (R0[..., 2] + warped[..., 2]) * 0.5, R0[..., 2])
    r5 = np.where(inside, (R0[..., 3] + warped[..., 3]) * 0.5, R0[..., 3])
    r6 = np.where(inside, (R0[..., 4] + warped[..., 4]) * 0.25, R0[..., 4] * 0.5)

    r2 = (R0[..., 0] - r2) * 0.5
    r3 = (R0[..., 1] - r3) * 0.5
    r2 = r2 + r4 * dy + r6 * dx
    r3 = r3 + r6 * dy + r5 * dx

    # down-weight the outermost rows/columns, whose expansion saw replicated pixels
    sx = np.ones(W)
    sy = np.ones(H)
    b = len(_BORDER)
    for i in range(min(b, W)):
        sx[i] *= _BORDER[i]
        sx[W - 1 - i] *= _BORDER[i]
    for i in range(min(b, H)):
        sy[i] *= _BORDER[i]
        sy[H - 1 - i] *= _BORDER[i]
    scale = sy[:, None] * sx[None, :]
    r2, r3, r4, r5, r6 = (r * scale for r in (r2, r3, r4, r5, r6))

    M = np.empty((H, W, 5))
    M[..., 0] = r4 * r4 + r6 * r6
    M[..., 1] = (r4 + r5) * r6
    M[..., 2] = r5 * r5 + r6 * r6
    M[..., 3] = r4 * r2 + r6 * r3
    M[..., 4] = r6 * r2 + r5 * r3
    return M


def _box_sum(a, m, axis):
    n = a.shape[axis]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (m + 1, m)
    c = np.cumsum(np.pad(a, pad, mode="edge"), axis=axis)
    hi = np.take(c, np.arange(2 * m + 1, 2 * m + 1 + n), axis=axis)
    lo = np.take(c, np.arange(0, n), axis=axis)
    return hi - lo


def update_flow_blur(M, winsize):
    """Box-average the normal equations and solve the 2x2 system per pixel."""
    m = winsize // 2
    S = _box_sum(_box_sum(M, m, 0), m, 1) / float(winsize * winsize)
    g11, g12, g22, h1, h2 = (S[..., i] for i in range(5))
    idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3)
    flow = np.empty(M.shape[:2] + (2,))
    flow[..., 0] = (g11 * h2 - g12 * h1) * idet
    flow[..., 1] = (g22 * h1 - g12 * h2) * idet
    return flow
