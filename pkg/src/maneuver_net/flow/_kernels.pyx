# cython: language_level=3
"""Compiled polynomial-expansion flow kernels.

Mirrors ``_kernels_py`` exactly (float64 throughout); see that module for the
reference semantics.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

from ._kernels_py import gaussian_basis

cnp.import_array()

cdef double[5] BORDER = [0.14, 0.14, 0.4472, 0.4472, 0.4472]


def poly_exp(img, int n, double sigma):
    cdef double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t H = src.shape[0], W = src.shape[1]
    g_, xg_, xxg_, ig11_, ig03_, ig33_, ig55_ = gaussian_basis(n, sigma)
    cdef double[::1] g = g_, xg = xg_, xxg = xxg_
    cdef double ig11 = ig11_, ig03 = ig03_, ig33 = ig33_, ig55 = ig55_

    out = np.empty((H, W, 5), dtype=np.float64)
    cdef double[:, :, ::1] R = out
    # vertical pass results with n replicated columns on each side
    cdef double[:, ::1] row = np.empty((W + 2 * n, 3), dtype=np.float64)
    cdef Py_ssize_t x, y, k, yy0, yy1
    cdef double s0, s1, s2, p0, p1, tg
    cdef double b1, b2, b3, b4, b5, b6

    for y in range(H):
        for x in range(W):
            s0 = src[y, x] * g[n]
            s1 = 0.0
            s2 = src[y, x] * xxg[n]
            for k in range(1, n + 1):
                yy0 = y - k
                if yy0 < 0:
                    yy0 = 0
                yy1 = y + k
                if yy1 > H - 1:
                    yy1 = H - 1
                p0 = src[yy0, x]
                p1 = src[yy1, x]
                s0 += g[n + k] * (p1 + p0)
                s1 += xg[n + k] * (p1 - p0)
                s2 += xxg[n + k] * (p1 + p0)
            row[x + n, 0] = s0
            row[x + n, 1] = s1
            row[x + n, 2] = s2
        for k in range(n):
            row[k, 0] = row[n, 0]
            row[k, 1] = row[n, 1]
            row[k, 2] = row[n, 2]
            row[W + n + k, 0] = row[W + n - 1, 0]
            row[W + n + k, 1] = row[W + n - 1, 1]
            row[W + n + k, 2] = row[W + n - 1, 2]

        for x in range(W):
            b1 = row[x + n, 0] * g[n]
            b2 = 0.0
            b3 = row[x + n, 1] * g[n]
            b4 = row[x + n, 0] * xxg[n]
            b5 = row[x + n, 2] * g[n]
            b6 = 0.0
            for k in range(1, n + 1):
                tg = row[x + n + k, 0] + row[x + n - k, 0]
                b1 += tg * g[n + k]
                b4 += tg * xxg[n + k]
                b2 += (row[x + n + k, 0] - row[x + n - k, 0]) * xg[n + k]
                b3 += (row[x + n + k, 1] + row[x + n - k, 1]) * g[n + k]
                b6 += (row[x + n + k, 1] - row[x + n - k, 1]) * xg[n + k]
                b5 += (row[x + n + k, 2] + row[x + n - k, 2]) * g[n + k]
            R[y, x, 0] = b3 * ig11
            R[y, x, 1] = b2 * ig11
            R[y, x, 2] = b1 * ig03 + b5 * ig33
            R[y, x, 3] = b1 * ig03 + b4 * ig33
            R[y, x, 4] = b6 * ig55
    return out


def update_matrices(R0_, R1_, flow_):
    cdef double[:, :, ::1] R0 = np.ascontiguousarray(R0_, dtype=np.float64)
    cdef double[:, :, ::1] R1 = np.ascontiguousarray(R1_, dtype=np.float64)
    cdef double[:, :, ::1] flow = np.ascontiguousarray(flow_, dtype=np.float64)
    cdef Py_ssize_t H = flow.shape[0], W = flow.shape[1]
    out = np.empty((H, W, 5), dtype=np.float64)
    cdef double[:, :, ::1] M = out
    cdef Py_ssize_t x, y, x1, y1, c
    cdef double dx, dy, fx, fy, a00, a01, a10, a11
    cdef double r2, r3, r4, r5, r6, scale
    cdef double w[5]

    for y in range(H):
        for x in range(W):
            dx = flow[y, x, 0]
            dy = flow[y, x, 1]
            fx = x + dx
            fy = y + dy
            x1 = <Py_ssize_t>floor(fx)
            y1 = <Py_ssize_t>floor(fy)
            fx -= x1
            fy -= y1
            if 0 <= x1 < W - 1 and 0 <= y1 < H - 1:
                a00 = (1.0 - fx) * (1.0 - fy)
                a01 = fx * (1.0 - fy)
                a10 = (1.0 - fx) * fy
                a11 = fx * fy
                for c in range(5):
                    w[c] = (a00 * R1[y1, x1, c] + a01 * R1[y1, x1 + 1, c]
                            + a10 * R1[y1 + 1, x1, c] + a11 * R1[y1 + 1, x1 + 1, c])
                r2 = w[0]
                r3 = w[1]
                r4 = (R0[y, x, 2] + w[2]) * 0.5
                r5 = (R0[y, x, 3] + w[3]) * 0.5
                r6 = (R0[y, x, 4] + w[4]) * 0.25
            else:
                r2 = 0.0
                r3 = 0.0
                r4 = R0[y, x, 2]
                r5 = R0[y, x, 3]
                r6 = R0[y, x, 4] * 0.5

            r2 = (R0[y, x, 0] - r2) * 0.5
            r3 = (R0[y, x, 1] - r3) * 0.5
            r2 += r4 * dy + r6 * dx
            r3 += r6 * dy + r5 * dx

            if x < 5 or x >= W - 5 or y < 5 or y >= H - 5:
                scale = 1.0
                if x < 5:
                    scale *= BORDER[x]
                if x >= W - 5:
                    scale *= BORDER[W - x - 1]
                if y < 5:
                    scale *= BORDER[y]
                if y >= H - 5:
                    scale *= BORDER[H - y - 1]
                r2 *= scale
                r3 *= scale
                r4 *= scale
                r5 *= scale
                r6 *= scale

            M[y, x, 0] = r4 * r4 + r6 * r6
            M[y, x, 1] = (r4 + r5) * r6
            M[y, x, 2] = r5 * r5 + r6 * r6
            M[y, x, 3] = r4 * r2 + r6 * r3
            M[y, x, 4] = r6 * r2 + r5 * r3
    return out


def update_flow_blur(M_, int winsize):
    cdef double[:, :, ::1] M = np.ascontiguousarray(M_, dtype=np.float64)
    cdef Py_ssize_t H = M.shape[0], W = M.shape[1]
    cdef Py_ssize_t m = winsize // 2
    cdef double scale = 1.0 / (winsize * winsize)
    # column sums over the vertical window, replicated border
    cdef double[:, :, ::1] V = np.zeros((H, W, 5), dtype=np.float64)
    cdef Py_ssize_t x, y, k, c, yy, xx
    cdef double s[5]
    cdef double g11, g12, g22, h1, h2, idet

    for x in range(W):
        for c in range(5):
            s[c] = 0.0
        for k in range(-m, m + 1):
            yy = k
            if yy < 0:
                yy = 0
            if yy > H - 1:
                yy = H - 1
            for c in range(5):
                s[c] += M[yy, x, c]
        for y in range(H):
            for c in range(5):
                V[y, x, c] = s[c]
            yy = y + m + 1
            if yy > H - 1:
                yy = H - 1
            k = y - m
            if k < 0:
                k = 0
            for c in range(5):
                s[c] += M[yy, x, c] - M[k, x, c]

    out = np.empty((H, W, 2), dtype=np.float64)
    cdef double[:, :, ::1] flow = out
    for y in range(H):
        for c in range(5):
            s[c] = 0.0
        for k in range(-m, m + 1):
            xx = k
            if xx < 0:
                xx = 0
            if xx > W - 1:
                xx = W - 1
            for c in range(5):
                s[c] += V[y, xx, c]
        for x in range(W):
            g11 = s[0] * scale
            g12 = s[1] * scale
            g22 = s[2] * scale
            h1 = s[3] * scale
            h2 = s[4] * scale
            idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3)
            flow[y, x, 0] = (g11 * h2 - g12 * h1) * idet
            flow[y, x, 1] = (g22 * h1 - g12 * h2) * idet
            xx = x + m + 1
            if xx > W - 1:
                xx = W - 1
            k = x - m
            if k < 0:
                k = 0
            for c in range(5):
                s[c] += V[y, xx, c] - V[y, k, c]
    return out
