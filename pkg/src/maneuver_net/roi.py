"""Vehicle-centred square regions of interest."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GapError, ValidationError
from .imgops import resize_bilinear, round_half_away

ROI_SCALES = (1, 2, 3, 4)


@dataclass(frozen=True)
class SquareBox:
    cx: float
    cy: float
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValidationError(f"box side must be > 0, got {self.side}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def pixel_window(self) -> tuple[int, int, int]:
        """(x0, y0, size) of the integer pixel window covered by the box."""
        size = int(round_half_away(self.side))
        x0 = int(round_half_away(self.cx - self.side / 2.0))
        y0 = int(round_half_away(self.cy - self.side / 2.0))
        return x0, y0, max(size, 1)


@dataclass(frozen=True)
class Provenance:
    recording: str
    frame: int
    vehicle: int
    scale: int


@dataclass
class Patch:
    pixels: np.ndarray
    provenance: Provenance | None = None

    def __post_init__(self):
        p = self.pixels
        if p.ndim == 2:
            p = self.pixels = p[..., None]
        if p.ndim != 3 or p.shape[0] != p.shape[1] or p.shape[2] not in (1, 3):
            raise ValidationError(f"patch must be SxSx1 or SxSx3, got {p.shape}")

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


def check_scale(scale: int) -> int:
    if scale not in ROI_SCALES:
        raise ValidationError(f"ROI scale must be one of {ROI_SCALES}, got {scale}")
    return int(scale)


def square_bbox(contour) -> SquareBox:
    """Square around the contour's axis-aligned box, side = longer extent."""
    pts = np.asarray(contour, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValidationError("contour needs >= 3 (x, y) points")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    side = float(np.max(hi - lo))
    if side <= 0:
        raise ValidationError("degenerate contour: all points coincide")
    c = (lo + hi) / 2.0
    return SquareBox(float(c[0]), float(c[1]), side)


def scale_box(box: SquareBox, scale: int) -> SquareBox:
    return SquareBox(box.cx, box.cy, box.side * check_scale(scale))


def crop_pad(frame: np.ndarray, box: SquareBox, provenance: Provenance | None = None) -> Patch:
    """Copy the box out of ``frame``; pixels outside the image are zero."""
    if box.side < 1:
        raise ValidationError("box side must be >= 1 pixel")
    img = np.asarray(frame)
    if img.ndim == 2:
        img = img[..., None]
    H, W = img.shape[:2]
    x0, y0, S = box.pixel_window()
    out = np.zeros((S, S, img.shape[2]), dtype=img.dtype)
    sx0, sx1 = max(x0, 0), min(x0 + S, W)
    sy0, sy1 = max(y0, 0), min(y0 + S, H)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = img[sy0:sy1, sx0:sx1]
    return Patch(out, provenance)


def padding_mask(frame_shape, box: SquareBox) -> np.ndarray:
    """Boolean SxS mask of patch pixels that fall outside the image."""
    H, W = frame_shape[:2]
    x0, y0, S = box.pixel_window()
    xs = np.arange(x0, x0 + S)
    ys = np.arange(y0, y0 + S)
    inside = ((ys >= 0) & (ys < H))[:, None] & ((xs >= 0) & (xs < W))[None, :]
    return ~inside


def resize_patch(patch: Patch, target: int) -> Patch:
    """Bilinear resize to target x target, keeping the input dtype."""
    if target < 8:
        raise ValidationError("resize target must be >= 8")
    px = patch.pixels
    if px.size == 0:
        raise ValidationError("cannot resize an empty patch")
    if px.shape[0] == target:
        return Patch(px.copy(), patch.provenance)
    out = resize_bilinear(px, target, target)
    if np.issubdtype(px.dtype, np.integer):
        info = np.iinfo(px.dtype)
        out = np.clip(np.rint(out), info.min, info.max)
    return Patch(out.astype(px.dtype), patch.provenance)


def extract_roi_sequence(recording, vehicle_id: int, frame_indices: Sequence[int], scale: int,
                         target: int | None = None) -> list[Patch]:
    """One vehicle-centred patch per frame, the box recomputed from each frame's contour."""
    scale = check_scale(scale)
    track = recording.tracks.get(vehicle_id)
    if track is None:
        raise ValidationError(f"no track for vehicle {vehicle_id}")
    patches = []
    for f in frame_indices:
        obs = track.at(f)
        if obs is None:
            raise GapError(f"vehicle {vehicle_id} has no contour at frame {f}")
        box = scale_box(square_bbox(obs.contour), scale)
        prov = Provenance(recording.name, f, vehicle_id, scale)
        patch = crop_pad(recording.frames[f], box, prov)
        if target is not None:
            patch = resize_patch(patch, target)
        patches.append(patch)
    return patches
