"""Coarse-to-fine polynomial-expansion optical flow.

Each frame is locally approximated by a quadratic polynomial; the
displacement that best maps the first expansion onto the second is solved
in a box-weighted neighbourhood, refined over a few iterations and over an
image pyramid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..imgops import gaussian_blur, resize_bilinear, to_gray


@dataclass(frozen=True)
class FlowParams:
    levels: int = 3
    pyr_scale: float = 0.5
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2
    # pyramid levels narrower than this are skipped
    min_size: int = 32

    def __post_init__(self):
        if not 0 < self.pyr_scale < 1:
            raise ValueError("pyr_scale must be in (0, 1)")
        if self.winsize < 1 or self.iterations < 1 or self.poly_n < 1:
            raise ValueError("winsize, iterations and poly_n must be >= 1")


def _pyramid_depth(shape, params: FlowParams) -> int:
    scale = 1.0
    for k in range(params.levels):
        scale *= params.pyr_scale
        if shape[1] * scale < params.min_size or shape[0] * scale < params.min_size:
            return k
    return params.levels


def farneback_flow(prev: np.ndarray, nxt: np.ndarray, params: FlowParams = FlowParams(),
                   kernels=None) -> np.ndarray:
    """Forward flow ``prev -> nxt`` for 2-D float images; returns (H, W, 2) float64.

    ``flow[y, x] = (dx, dy)`` such that ``nxt[y + dy, x + dx] ~ prev[y, x]``.
    """
    if kernels is None:
        from . import kernels
    prev = np.asarray(prev, dtype=np.float64)
    nxt = np.asarray(nxt, dtype=np.float64)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise ValueError(f"flow needs two equal 2-D images, got {prev.shape} and {nxt.shape}")
    H, W = prev.shape
    depth = _pyramid_depth(prev.shape, params)
    flow = None
    for k in range(depth, -1, -1):
        scale = params.pyr_scale**k
        sigma = (1.0 / scale - 1.0) * 0.5
        ksize = max(int(np.floor(sigma * 5 + 0.5)) | 1, 3)
        h = int(np.floor(H * scale + 0.5))
        w = int(np.floor(W * scale + 0.5))
        if flow is None:
            flow = np.zeros((h, w, 2))
        else:
            flow = resize_bilinear(flow, h, w) / params.pyr_scale
        R = []
        for img in (prev, nxt):
            level = resize_bilinear(gaussian_blur(img, ksize, sigma), h, w)
            R.append(kernels.poly_exp(level, params.poly_n, params.poly_sigma))
        M = kernels.update_matrices(R[0], R[1], flow)
        for i in range(params.iterations):
            flow = kernels.update_flow_blur(M, params.winsize)
            if i < params.iterations - 1:
                M = kernels.update_matrices(R[0], R[1], flow)
    return flow


def _pixels(patch) -> np.ndarray:
    return patch.pixels if hasattr(patch, "pixels") else np.asarray(patch)


def dense_flow(prev, nxt, params: FlowParams = FlowParams(), kernels=None) -> np.ndarray:
    """Flow between two patches (RGB or grayscale); returns (S, S, 2) float32."""
    a = _pixels(prev)
    b = _pixels(nxt)
    if a.shape != b.shape:
        raise ValueError(f"patch shapes differ: {a.shape} vs {b.shape}")
    field = farneback_flow(to_gray(a), to_gray(b), params, kernels)
    if not np.all(np.isfinite(field)):
        raise FloatingPointError("non-finite flow")
    return field.astype(np.float32)


def flow_sequence(patches: Sequence, params: FlowParams = FlowParams()) -> list[np.ndarray]:
    """Flow for every consecutive pair; ``len(patches) - 1`` fields."""
    grays = [to_gray(_pixels(p)) for p in patches]
    return [
        farneback_flow(a, b, params).astype(np.float32) for a, b in zip(grays, grays[1:])
    ]


def flow_to_input(fields: Sequence[np.ndarray], clip: float = 20.0) -> np.ndarray:
    """Stack L fields as (S, S, 2L) ordered dx1, dy1, ..., scaled into [-1, 1]."""
    if clip <= 0:
        raise ValueError("clip must be > 0")
    if len(fields) == 0:
        raise ValueError("need at least one flow field")
    shape = np.shape(fields[0])
    if len(shape) != 3 or shape[2] != 2:
        raise ValueError(f"flow fields must be (S, S, 2), got {shape}")
    for f in fields:
        if np.shape(f) != shape:
            raise ValueError("flow fields have inconsistent shapes")
    stack = np.concatenate([np.asarray(f, dtype=np.float32) for f in fields], axis=2)
    return np.clip(stack, -clip, clip) / np.float32(clip)
