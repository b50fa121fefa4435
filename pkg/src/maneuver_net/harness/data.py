"""Clip tensors for sample windows, from recordings or an extraction cache.

A window of N frames gives an appearance clip of N resized ROI patches
(uint8, N x S x S x 3) and a motion clip of N - 1 flow fields between
consecutive patches, clipped and scaled into [-1, 1] (N-1 x S x S x 2).
Patches and flow fields are memoised per (recording, vehicle, scale, frame)
so overlapping windows reuse work.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..cache import flow_path, patch_path, read_array, write_array
from ..errors import CacheMissError, ValidationError
from ..flow import FlowParams, dense_flow
from ..ingest import Recording
from ..roi import extract_roi_sequence
from ..windowing import SampleWindow

log = logging.getLogger(__name__)

PATCH_SIZE = 112
FLOW_CLIP = 20.0


@dataclass
class ClipData:
    """In-memory clips for a list of windows; row i belongs to windows[i]."""

    appearance: np.ndarray  # (n, N, S, S, 3) uint8
    flow: np.ndarray  # (n, N-1, S, S, 2) float16, already in [-1, 1]
    labels: np.ndarray  # (n,) int64
    windows: list[SampleWindow]

    def __post_init__(self):
        n = len(self.windows)
        if not (len(self.appearance) == len(self.flow) == len(self.labels) == n):
            raise ValidationError("clip arrays and windows differ in length")

    def __len__(self):
        return len(self.windows)

    @property
    def flow_fields(self) -> int:
        return self.flow.shape[1]

    def subset(self, idx) -> "ClipData":
        idx = np.asarray(idx, dtype=np.int64)
        return ClipData(self.appearance[idx], self.flow[idx], self.labels[idx], [self.windows[i] for i in idx])

    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=3).tolist()


class ClipStore:
    """Resolves windows to clip arrays.

    Looks in ``cache_dirs[recording]`` (layout of :mod:`maneuver_net.cache`)
    first, then falls back to computing from ``recordings``. With neither
    available the lookup raises :class:`CacheMissError` naming the window.
    """

    def __init__(self, recordings: Mapping[str, Recording] | Sequence[Recording] = (),
                 cache_dirs: Mapping[str, Path] | None = None, size: int = PATCH_SIZE,
                 flow_params: FlowParams = FlowParams(), flow_clip: float = FLOW_CLIP):
        if not isinstance(recordings, Mapping):
            recordings = {r.name: r for r in recordings}
        self.recordings = dict(recordings)
        self.cache_dirs = {k: Path(v) for k, v in (cache_dirs or {}).items()}
        self.size = size
        self.flow_params = flow_params
        self.flow_clip = flow_clip
        self._patches: dict[tuple, np.ndarray] = {}
        self._flows: dict[tuple, np.ndarray] = {}

    def _patch(self, w: SampleWindow, scale: int, frame: int) -> np.ndarray:
        key = (w.recording, w.vehicle_id, scale, frame)
        hit = self._patches.get(key)
        if hit is not None:
            return hit
        px = None
        cdir = self.cache_dirs.get(w.recording)
        if cdir is not None:
            try:
                px = read_array(patch_path(cdir, w.vehicle_id, scale, frame))
            except CacheMissError:
                px = None
        if px is None:
            rec = self.recordings.get(w.recording)
            if rec is None:
                raise CacheMissError(f"window {w.key} (scale {scale}): no cached patch for frame {frame}")
            px = extract_roi_sequence(rec, w.vehicle_id, [frame], scale, self.size)[0].pixels
        if px.shape != (self.size, self.size, 3):
            raise ValidationError(f"window {w.key}: patch shape {px.shape}, expected {self.size}x{self.size}x3")
        self._patches[key] = px
        return px

    def _flow(self, w: SampleWindow, scale: int, frame: int) -> np.ndarray:
        """Conditioned flow from ``frame`` to ``frame + 1``: clipped, scaled, float16."""
        key = (w.recording, w.vehicle_id, scale, frame)
        hit = self._flows.get(key)
        if hit is not None:
            return hit
        field = None
        cdir = self.cache_dirs.get(w.recording)
        if cdir is not None:
            try:
                field = read_array(flow_path(cdir, w.vehicle_id, scale, frame)).astype(np.float32)
            except CacheMissError:
                field = None
        if field is None:
            field = dense_flow(self._patch(w, scale, frame), self._patch(w, scale, frame + 1), self.flow_params)
        field = (np.clip(field, -self.flow_clip, self.flow_clip) / np.float32(self.flow_clip)).astype(np.float16)
        self._flows[key] = field
        return field

    def clip(self, w: SampleWindow, scale: int) -> tuple[np.ndarray, np.ndarray]:
        frames = w.frame_indices
        app = np.stack([self._patch(w, scale, f) for f in frames])
        flow = np.stack([self._flow(w, scale, f) for f in frames[:-1]])
        return app, flow

    def dataset(self, windows: Sequence[SampleWindow], scale: int) -> ClipData:
        windows = list(windows)
        if not windows:
            raise ValidationError("no windows to load")
        lengths = {w.length for w in windows}
        if len(lengths) != 1:
            raise ValidationError(f"windows differ in length: {sorted(lengths)}")
        if lengths.pop() < 2:
            raise ValidationError("windows need at least 2 frames for flow")
        apps, flows = zip(*(self.clip(w, scale) for w in windows))
        labels = np.array([int(w.label) for w in windows], dtype=np.int64)
        return ClipData(np.stack(apps), np.stack(flows), labels, windows)

    def clear(self):
        self._patches.clear()
        self._flows.clear()


def extract_to_cache(recording: Recording, scale: int, out_dir, size: int = PATCH_SIZE,
                     flow_params: FlowParams = FlowParams(), vehicles: Sequence[int] | None = None) -> int:
    """Write every tracked patch and every consecutive-frame flow of a recording.

    Returns the number of files written. Flow is stored in pixels (float32);
    clipping happens at load time.
    """
    out_dir = Path(out_dir)
    n = 0
    for vid in sorted(vehicles if vehicles is not None else recording.tracks):
        frames = recording.tracks[vid].frames()
        patches = extract_roi_sequence(recording, vid, frames, scale, size)
        for f, p in zip(frames, patches):
            write_array(patch_path(out_dir, vid, scale, f), p.pixels)
            n += 1
        for (f0, p0), (f1, p1) in zip(zip(frames, patches), zip(frames[1:], patches[1:])):
            if f1 != f0 + 1:
                continue
            write_array(flow_path(out_dir, vid, scale, f0), dense_flow(p0, p1, flow_params))
            n += 1
    log.info("%s: wrote %d cache entries at scale %d", recording.name, n, scale)
    return n
