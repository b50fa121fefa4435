"""Per-class sequence counts and mean lengths (dataset summary table)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .ingest import Maneuver, Recording
from .windowing import WindowSpec, _runs, lane_keeping_segments

# Reference figures for the PREVENTION highway set, used as a formatting fixture.
PREVENTION_STATS = {
    "counts": {"NLC": 3110, "LLC": 342, "RLC": 438},
    "mean_frames": {"NLC": 50.9, "LLC": 96.8, "RLC": 80.1},
}


@dataclass
class DatasetStats:
    counts: dict[str, int] = field(default_factory=lambda: {m.name: 0 for m in Maneuver})
    mean_frames: dict[str, float] = field(
        default_factory=lambda: {m.name: 0.0 for m in Maneuver}
    )

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "mean_frames": dict(self.mean_frames)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        return cls(dict(d["counts"]), {k: float(v) for k, v in d["mean_frames"].items()})

    def render(self) -> str:
        names = [m.name for m in Maneuver]
        rows = [
            ("", *names),
            ("# of sequences", *(str(self.counts[n]) for n in names)),
            ("avg. # of frames", *(f"{self.mean_frames[n]:.1f}" for n in names)),
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join(
            " | ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths)))
            for r in rows
        )


def event_sequences(recording: Recording) -> list[tuple[Maneuver, int]]:
    """(label, length) per event: the observed run holding the event frame,
    split halfway between consecutive events of the same vehicle."""
    out = []
    for vid, track in recording.tracks.items():
        events = sorted(recording.events_for(vid), key=lambda e: e.event_frame)
        runs = _runs(track.frames())
        for i, ev in enumerate(events):
            lo, hi = next((a, b) for a, b in runs if a <= ev.event_frame <= b)
            if i > 0 and events[i - 1].event_frame >= lo:
                lo = max(lo, (events[i - 1].event_frame + ev.event_frame) // 2 + 1)
            if i + 1 < len(events) and events[i + 1].event_frame <= hi:
                hi = min(hi, (ev.event_frame + events[i + 1].event_frame) // 2)
            out.append((ev.label, hi - lo + 1))
    return out


def nlc_sequences(recording: Recording, spec: WindowSpec,
                  exclusion_margin: int | None = None) -> list[int]:
    """Lengths of lane-keeping stretches long enough to hold one window."""
    margin = 2 * spec.obs_horizon if exclusion_margin is None else exclusion_margin
    out = []
    for vid in sorted(recording.tracks):
        for lo, hi in lane_keeping_segments(recording, vid, margin):
            if hi - lo + 1 >= spec.obs_horizon:
                out.append(hi - lo + 1)
    return out


def dataset_stats(recordings: Iterable[Recording], spec: WindowSpec = WindowSpec(),
                  exclusion_margin: int | None = None) -> DatasetStats:
    lengths: dict[str, list[int]] = {m.name: [] for m in Maneuver}
    for rec in recordings:
        for label, n in event_sequences(rec):
            lengths[label.name].append(n)
        lengths["NLC"].extend(nlc_sequences(rec, spec, exclusion_margin))
    stats = DatasetStats()
    for name, vals in lengths.items():
        stats.counts[name] = len(vals)
        stats.mean_frames[name] = sum(vals) / len(vals) if vals else 0.0
    return stats
