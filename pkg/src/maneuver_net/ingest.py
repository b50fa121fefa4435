"""Recording model and the plain-text interchange format.

A recording directory looks like::

    meta.json            {"frame_rate": 10.0, "width": W, "height": H, "frame_count": F}
    frames/000000.png    RGB frames, one file per index
    tracks.csv           frame,vehicle_id,x0,y0,x1,y1,...   (ragged rows)
    events.csv           vehicle_id,label,event_frame       (label in LLC, RLC)
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from . import FORMAT_VERSION
from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)

FRAME_PATTERN = "{:06d}.png"


class Maneuver(enum.IntEnum):
    """Target classes; the integer value is the class index used everywhere."""

    NLC = 0
    LLC = 1
    RLC = 2

    @classmethod
    def parse(cls, text: str) -> "Maneuver":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown maneuver label {text!r}") from None


@dataclass(frozen=True)
class ContourObservation:
    frame_index: int
    vehicle_id: int
    contour: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError(
                f"negative frame index {self.frame_index} for vehicle {self.vehicle_id}"
            )
        if len(self.contour) < 3:
            raise ValidationError(
                f"contour with {len(self.contour)} points at frame {self.frame_index}, "
                f"vehicle {self.vehicle_id} (need >= 3)"
            )

    def points(self) -> np.ndarray:
        return np.asarray(self.contour, dtype=np.float64)


@dataclass
class TrackedVehicle:
    vehicle_id: int
    observations: list[ContourObservation]
    _by_frame: dict[int, ContourObservation] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.observations:
            raise ValidationError(f"vehicle {self.vehicle_id} has no observations")
        frames = [o.frame_index for o in self.observations]
        for a, b in zip(frames, frames[1:]):
            if b <= a:
                raise ValidationError(
                    f"vehicle {self.vehicle_id}: frame indices not strictly increasing "
                    f"({a} then {b})"
                )
        for o in self.observations:
            if o.vehicle_id != self.vehicle_id:
                raise ValidationError(
                    f"observation for vehicle {o.vehicle_id} filed under {self.vehicle_id}"
                )
        self._by_frame = {o.frame_index: o for o in self.observations}

    @property
    def first_frame(self) -> int:
        return self.observations[0].frame_index

    @property
    def last_frame(self) -> int:
        return self.observations[-1].frame_index

    def frames(self) -> list[int]:
        return [o.frame_index for o in self.observations]

    def at(self, frame_index: int) -> ContourObservation | None:
        return self._by_frame.get(frame_index)

    def has_frames(self, frame_indices: Iterable[int]) -> bool:
        return all(f in self._by_frame for f in frame_indices)


@dataclass(frozen=True)
class ManeuverEvent:
    vehicle_id: int
    label: Maneuver
    event_frame: int

    def __post_init__(self):
        if self.label == Maneuver.NLC:
            raise ValidationError("events carry LLC or RLC labels only")


class ArrayFrames:
    """In-memory frame source backed by a (F, H, W, 3) uint8 array."""

    def __init__(self, frames: np.ndarray):
        frames = np.asarray(frames)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValidationError(f"expected (F, H, W, 3) frames, got {frames.shape}")
        self._frames = frames.astype(np.uint8, copy=False)

    def __len__(self):
        return self._frames.shape[0]

    def __getitem__(self, index: int) -> np.ndarray:
        return self._frames[index]

    @property
    def shape(self) -> tuple[int, int]:
        return self._frames.shape[1], self._frames.shape[2]


class PngFrames:
    """Lazily loads ``frames/%06d.png`` files."""

    def __init__(self, directory: Path, count: int):
        self.directory = Path(directory)
        self._count = count

    def __len__(self):
        return self._count

    def __getitem__(self, index: int) -> np.ndarray:
        if not 0 <= index < self._count:
            raise IndexError(index)
        path = self.directory / FRAME_PATTERN.format(index)
        try:
            with Image.open(path) as im:
                return np.asarray(im.convert("RGB"))
        except FileNotFoundError:
            raise FormatError(f"missing frame file {path}") from None


@dataclass(eq=False)
class Recording:
    frames: Sequence[np.ndarray]
    frame_rate: float
    width: int
    height: int
    tracks: dict[int, TrackedVehicle]
    events: list[ManeuverEvent]
    name: str = "recording"

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValidationError(f"frame_rate must be > 0, got {self.frame_rate}")
        n = len(self.frames)
        for vid, track in self.tracks.items():
            if vid != track.vehicle_id:
                raise ValidationError(f"track keyed {vid} holds vehicle {track.vehicle_id}")
            if track.last_frame >= n:
                raise ValidationError(
                    f"vehicle {vid} observed at frame {track.last_frame} but recording "
                    f"has {n} frames"
                )
        for ev in self.events:
            track = self.tracks.get(ev.vehicle_id)
            if track is None:
                raise ValidationError(f"event references unknown vehicle {ev.vehicle_id}")
            if not track.first_frame <= ev.event_frame <= track.last_frame:
                raise ValidationError(
                    f"event frame {ev.event_frame} outside vehicle {ev.vehicle_id} range "
                    f"[{track.first_frame}, {track.last_frame}]"
                )

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def events_for(self, vehicle_id: int) -> list[ManeuverEvent]:
        return [e for e in self.events if e.vehicle_id == vehicle_id]

    def annotations_equal(self, other: "Recording") -> bool:
        return (
            self.frame_rate == other.frame_rate
            and self.width == other.width
            and self.height == other.height
            and self.frame_count == other.frame_count
            and self.events == other.events
            and sorted(self.tracks) == sorted(other.tracks)
            and all(
                self.tracks[v].observations == other.tracks[v].observations
                for v in self.tracks
            )
        )

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        if not self.annotations_equal(other):
            return False
        return all(
            np.array_equal(self.frames[i], other.frames[i]) for i in range(self.frame_count)
        )

    __hash__ = None


def build_tracks(observations: Iterable[ContourObservation]) -> dict[int, TrackedVehicle]:
    per_vehicle: dict[int, dict[int, ContourObservation]] = {}
    for obs in observations:
        frames = per_vehicle.setdefault(obs.vehicle_id, {})
        if obs.frame_index in frames:
            raise ValidationError(
                f"duplicate observation for vehicle {obs.vehicle_id} at frame {obs.frame_index}"
            )
        frames[obs.frame_index] = obs
    return {
        vid: TrackedVehicle(vid, [frames[f] for f in sorted(frames)])
        for vid, frames in sorted(per_vehicle.items())
    }


# --------------------------------------------------------------------------
# reading


def _read_meta(root: Path) -> dict:
    path = root / "meta.json"
    if not path.is_file():
        raise FormatError(f"missing {path}")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    for key in ("frame_rate", "width", "height"):
        if key not in meta:
            raise FormatError(f"{path}: missing key {key!r}")
    return meta


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{where}: expected integer, got {text!r}") from None


def _read_tracks(path: Path) -> list[ContourObservation]:
    if not path.is_file():
        raise FormatError(f"missing {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["frame", "vehicle_id"]:
            raise FormatError(f"{path}: header must start with 'frame,vehicle_id'")
        for lineno, row in enumerate(reader, start=2):
            row = [c for c in row if c.strip() != ""]
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) < 2 or (len(row) - 2) % 2:
                raise FormatError(f"{where}: expected frame, vehicle_id and x,y pairs")
            frame = _parse_int(row[0], where)
            vid = _parse_int(row[1], where)
            try:
                coords = [float(c) for c in row[2:]]
            except ValueError:
                raise FormatError(f"{where}: non-numeric coordinate") from None
            pts = tuple(zip(coords[0::2], coords[1::2]))
            out.append(ContourObservation(frame, vid, pts))
    return out


def _read_events(path: Path) -> list[ManeuverEvent]:
    if not path.is_file():
        raise FormatError(f"missing {path}")
    events = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "vehicle_id",
            "label",
            "event_frame",
        ]:
            raise FormatError(f"{path}: header must be 'vehicle_id,label,event_frame'")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            label = Maneuver.parse(row["label"])
            if label == Maneuver.NLC:
                raise ValidationError(f"{where}: NLC is not an event label")
            events.append(
                ManeuverEvent(
                    _parse_int(row["vehicle_id"], where),
                    label,
                    _parse_int(row["event_frame"], where),
                )
            )
    return events


def parse_recording(root_path) -> Recording:
    """Load a recording directory, validating every invariant on the way in."""
    root = Path(root_path)
    if not root.is_dir():
        raise FormatError(f"not a directory: {root}")
    meta = _read_meta(root)
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise FormatError(f"missing {frames_dir}")
    count = meta.get("frame_count")
    if count is None:
        count = len(list(frames_dir.glob("*.png")))
    for i in (0, count - 1):
        if count and not (frames_dir / FRAME_PATTERN.format(i)).is_file():
            raise FormatError(f"missing frame file {frames_dir / FRAME_PATTERN.format(i)}")
    tracks = build_tracks(_read_tracks(root / "tracks.csv"))
    events = _read_events(root / "events.csv")
    return Recording(
        frames=PngFrames(frames_dir, int(count)),
        frame_rate=float(meta["frame_rate"]),
        width=int(meta["width"]),
        height=int(meta["height"]),
        tracks=tracks,
        events=events,
        name=meta.get("name", root.name),
    )


# --------------------------------------------------------------------------
# writing


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def write_recording(recording: Recording, root_path) -> Path:
    """Write ``recording`` in the interchange format; returns the directory."""
    root = Path(root_path)
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "name": recording.name,
        "frame_rate": recording.frame_rate,
        "width": recording.width,
        "height": recording.height,
        "frame_count": recording.frame_count,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for i in range(recording.frame_count):
        # compress_level fixed so repeated writes are byte-identical
        Image.fromarray(np.asarray(recording.frames[i], dtype=np.uint8)).save(
            frames_dir / FRAME_PATTERN.format(i), compress_level=6
        )

    rows = [
        obs
        for vid in sorted(recording.tracks)
        for obs in recording.tracks[vid].observations
    ]
    rows.sort(key=lambda o: (o.frame_index, o.vehicle_id))
    npts = max((len(o.contour) for o in rows), default=3)
    header = ["frame", "vehicle_id"] + [f"{a}{i}" for i in range(npts) for a in "xy"]
    with (root / "tracks.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for o in rows:
            w.writerow(
                [o.frame_index, o.vehicle_id] + [_fmt(c) for pt in o.contour for c in pt]
            )
    with (root / "events.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vehicle_id", "label", "event_frame"])
        for ev in recording.events:
            w.writerow([ev.vehicle_id, ev.label.name, ev.event_frame])
    return root


def load_recordings(paths: Iterable) -> list[Recording]:
    return [parse_recording(p) for p in paths]


def recording_index(recordings: Iterable[Recording]) -> Mapping[str, Recording]:
    out = {}
    for rec in recordings:
        if rec.name in out:
            raise ValidationError(f"duplicate recording name {rec.name!r}")
        out[rec.name] = rec
    return out
