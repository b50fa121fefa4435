"""Labelled sample windows from tracks and events.

A window is ``N`` consecutive frames of one vehicle. For a lane-change event
at frame ``e`` and time-to-event ``tte`` the window ends at ``e - tte``, so
the event frame itself is only observed in the classification setting
(``tte == 0``). No-lane-change windows are slid over lane-keeping stretches
of each track, away from that vehicle's events.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, OutOfRangeError, ValidationError
from .imgops import round_half_away
from .ingest import Maneuver, Recording
from .roi import check_scale

log = logging.getLogger(__name__)

STANDARD_HORIZONS = (20, 30, 40)
STANDARD_TTES = (0, 10, 20)


@dataclass(frozen=True)
class WindowSpec:
    obs_horizon: int = 20
    tte: int = 0
    roi_scale: int = 3

    def __post_init__(self):
        if self.obs_horizon <= 0:
            raise ValidationError("observation horizon must be > 0")
        if self.tte < 0:
            raise ValidationError("time-to-event must be >= 0")
        check_scale(self.roi_scale)

    @property
    def is_standard(self) -> bool:
        return self.obs_horizon in STANDARD_HORIZONS and self.tte in STANDARD_TTES

    def to_dict(self) -> dict:
        return {"obs_horizon": self.obs_horizon, "tte": self.tte, "roi_scale": self.roi_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(int(d.get("obs_horizon", 20)), int(d.get("tte", 0)), int(d.get("roi_scale", 3)))


@dataclass(frozen=True)
class SampleWindow:
    recording: str
    vehicle_id: int
    start: int
    end: int
    label: Maneuver
    event_frame: int | None = None

    @property
    def frame_indices(self) -> list[int]:
        return list(range(self.start, self.end + 1))

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def group(self) -> tuple:
        """Windows sharing a group must land in the same split."""
        return (self.recording, self.vehicle_id, self.event_frame)

    @property
    def key(self) -> str:
        return f"{self.recording}/{self.vehicle_id}/{self.start}-{self.end}"


@dataclass
class SplitAssignment:
    train: list[SampleWindow]
    val: list[SampleWindow]
    seed: int


def window_indices(event_frame: int, spec: WindowSpec) -> tuple[int, int]:
    """Inclusive (start, end) of the window ending ``tte`` frames before the event."""
    end = event_frame - spec.tte
    start = end - spec.obs_horizon + 1
    if start < 0:
        raise OutOfRangeError(
            f"event at frame {event_frame} lacks history for N={spec.obs_horizon}, "
            f"TTE={spec.tte}"
        )
    return start, end


def enumerate_event_samples(recording: Recording, spec: WindowSpec) -> list[SampleWindow]:
    out = []
    for ev in recording.events:
        try:
            start, end = window_indices(ev.event_frame, spec)
        except OutOfRangeError as exc:
            log.info("skip %s vehicle %d: %s", recording.name, ev.vehicle_id, exc)
            continue
        track = recording.tracks[ev.vehicle_id]
        if not track.has_frames(range(start, end + 1)):
            log.info(
                "skip %s vehicle %d event %d: contour gaps in [%d, %d]",
                recording.name, ev.vehicle_id, ev.event_frame, start, end,
            )
            continue
        out.append(SampleWindow(recording.name, ev.vehicle_id, start, end, ev.label, ev.event_frame))
    return out


def _runs(frames: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers as inclusive (lo, hi) pairs."""
    runs = []
    for f in frames:
        if runs and f == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], f)
        else:
            runs.append((f, f))
    return runs


def lane_keeping_segments(recording: Recording, vehicle_id: int, exclusion_margin: int):
    """Contiguous observed stretches of a track outside every event's exclusion zone."""
    track = recording.tracks[vehicle_id]
    zones = [
        (e.event_frame - exclusion_margin, e.event_frame + exclusion_margin)
        for e in recording.events_for(vehicle_id)
    ]
    keep = [
        f for f in track.frames() if not any(lo <= f <= hi for lo, hi in zones)
    ]
    return _runs(keep)


def enumerate_nlc_samples(recording: Recording, spec: WindowSpec, stride: int | None = None,
                          exclusion_margin: int | None = None) -> list[SampleWindow]:
    N = spec.obs_horizon
    stride = N if stride is None else stride
    margin = 2 * N if exclusion_margin is None else exclusion_margin
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    out = []
    for vid in sorted(recording.tracks):
        for lo, hi in lane_keeping_segments(recording, vid, margin):
            for start in range(lo, hi - N + 2, stride):
                out.append(SampleWindow(recording.name, vid, start, start + N - 1, Maneuver.NLC))
    return out


def enumerate_samples(recording: Recording, spec: WindowSpec, stride: int | None = None,
                      exclusion_margin: int | None = None) -> list[SampleWindow]:
    return enumerate_event_samples(recording, spec) + enumerate_nlc_samples(
        recording, spec, stride, exclusion_margin
    )


def stratified_split(samples: Sequence[SampleWindow], val_fraction: float = 0.15,
                     seed: int = 0) -> SplitAssignment:
    """Per-class, group-aware split.

    Groups of each class are shuffled with the seed and moved into validation
    while that brings the class's validation count closer to
    ``round(val_fraction * class_count)``.
    """
    if not 0 < val_fraction < 1:
        raise ValidationError("val_fraction must lie in (0, 1)")
    by_class: dict[Maneuver, dict[tuple, list[SampleWindow]]] = defaultdict(dict)
    for s in samples:
        by_class[s.label].setdefault(s.group, []).append(s)
    train, val = [], []
    for label in sorted(by_class):
        groups = by_class[label]
        keys = sorted(groups, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2]))
        rng = np.random.default_rng([seed, int(label)])
        order = rng.permutation(len(keys))
        total = sum(len(g) for g in groups.values())
        target = int(round_half_away(val_fraction * total))
        n_val = 0
        for i in order:
            members = groups[keys[i]]
            if abs(n_val + len(members) - target) < abs(n_val - target):
                val.extend(members)
                n_val += len(members)
            else:
                train.extend(members)
    return SplitAssignment(train, val, seed)


def temporal_resample(frame_indices: Sequence[int], target_len: int) -> list[int]:
    """Pick ``target_len`` indices at rounded, evenly spaced positions."""
    idx = list(frame_indices)
    if target_len < 1:
        raise ValidationError("target_len must be >= 1")
    if not idx:
        raise ValidationError("cannot resample an empty index list")
    if target_len == 1:
        return [idx[0]]
    n = len(idx)
    pos = round_half_away(np.arange(target_len) * (n - 1) / (target_len - 1)).astype(int)
    return [idx[p] for p in pos]


# --------------------------------------------------------------------------
# manifests

MANIFEST_HEADER = ["recording", "vehicle_id", "start", "end", "label", "scale"]


def write_manifest(path, windows: Iterable[SampleWindow], scale: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for s in windows:
            w.writerow([s.recording, s.vehicle_id, s.start, s.end, s.label.name, scale])
    return path


def read_manifest(path) -> tuple[list[SampleWindow], int | None]:
    """Returns the windows and their common ROI scale (None when empty)."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing manifest {path}")
    windows, scales = [], set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise FormatError(f"{path}: header must be {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                windows.append(
                    SampleWindow(
                        row["recording"],
                        int(row["vehicle_id"]),
                        int(row["start"]),
                        int(row["end"]),
                        Maneuver.parse(row["label"]),
                    )
                )
                scales.add(check_scale(int(row["scale"])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(scales) > 1:
        raise FormatError(f"{path}: mixed ROI scales {sorted(scales)}")
    return windows, (scales.pop() if scales else None)
