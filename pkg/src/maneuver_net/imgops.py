"""Small image primitives shared by ROI extraction and optical flow."""

import numpy as np


def round_half_away(x):
    """Round half away from zero (``np.rint`` rounds half to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luminance with 0.299/0.587/0.114 weights; 2-D input passes through."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.float64)
    if image.ndim == 3 and image.shape[2] == 1:
        return image[..., 0].astype(np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HxW or HxWx3 image, got shape {image.shape}")
    rgb = image.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _axis_weights(n_src: int, n_dst: int):
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, pos - lo


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres; returns float64."""
    img = np.asarray(image, dtype=np.float64)
    y0, y1, fy = _axis_weights(img.shape[0], height)
    x0, x1, fx = _axis_weights(img.shape[1], width)
    extra = (1,) * (img.ndim - 2)
    fy = fy.reshape((-1, 1) + extra)
    fx = fx.reshape((1, -1) + extra)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def gaussian_kernel(ksize: int, sigma: float) -> np.ndarray:
    if sigma <= 0:
        sigma = 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8
    x = np.arange(ksize) - (ksize - 1) / 2.0
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, ksize: int, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with mirror (reflect-101) borders."""
    k = gaussian_kernel(ksize, sigma)
    r = ksize // 2
    out = np.asarray(image, dtype=np.float64)
    for axis in (0, 1):
        if out.shape[axis] <= r:
            mode = "edge"
        else:
            mode = "reflect"
        pad = [(0, 0)] * out.ndim
        pad[axis] = (r, r)
        p = np.pad(out, pad, mode=mode)
        n = out.shape[axis]
        acc = np.zeros_like(out)
        for i, w in enumerate(k):
            acc += w * np.take(p, np.arange(i, i + n), axis=axis)
        out = acc
    return out
