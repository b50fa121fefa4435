"""Deterministic synthetic highway scenarios with ground-truth annotations.

Each scenario owns a contiguous block of ``frames_per_scenario`` frames and a
single vehicle. The scene is a simplified front view: a textured sky band, a
textured road band that scrolls towards the camera, dashed lane markings and a
textured rectangle for the target vehicle. LLC/RLC vehicles keep their lane,
then drift laterally at constant speed so that the bottom-centre point of the
rectangle lands exactly on the marking centreline at the event frame.

Frames are rendered on demand from (config, seed); nothing random is kept
outside the per-scenario generators, so two calls with the same arguments
produce identical pixels.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import (
    ContourObservation,
    Maneuver,
    ManeuverEvent,
    Recording,
    TrackedVehicle,
)


@dataclass
class SynthConfig:
    width: int = 320
    height: int = 180
    lane_count: int = 2
    lane_width: int = 96
    frames_per_scenario: int = 50
    n_nlc: int = 2
    n_llc: int = 1
    n_rlc: int = 1
    frame_rate: float = 10.0
    horizon_row: int = 50
    vehicle_bottom_row: int = 150
    vehicle_width: tuple[int, int] = (36, 44)
    vehicle_height: tuple[int, int] = (26, 32)
    lateral_speed: tuple[float, float] = (1.2, 1.8)
    event_frame: tuple[int, int] = (40, 44)
    nlc_offset: float = 8.0
    nlc_drift: float = 0.15
    ego_speed: int = 2
    marking_contrast: float = 1.0
    marking_width: int = 4
    dash_period: int = 24
    texture_contrast: float = 40.0
    name: str = "synthetic"

    def __post_init__(self):
        for key in ("vehicle_width", "vehicle_height", "lateral_speed", "event_frame"):
            setattr(self, key, tuple(getattr(self, key)))
        self.validate()

    @property
    def scenario_count(self) -> int:
        return self.n_nlc + self.n_llc + self.n_rlc

    @property
    def frame_count(self) -> int:
        return self.scenario_count * self.frames_per_scenario

    def validate(self):
        if self.frames_per_scenario <= 0:
            raise ConfigError("frames_per_scenario must be > 0")
        if min(self.n_nlc, self.n_llc, self.n_rlc) < 0 or self.scenario_count == 0:
            raise ConfigError("need at least one vehicle scenario")
        if self.width < 32 or self.height < 32:
            raise ConfigError("image must be at least 32x32")
        if not 0 < self.horizon_row < self.vehicle_bottom_row <= self.height:
            raise ConfigError("need 0 < horizon_row < vehicle_bottom_row <= height")
        if self.lane_count < 1 or (self.n_llc + self.n_rlc and self.lane_count < 2):
            raise ConfigError("lane changes need at least two lanes")
        if self.lane_count * self.lane_width > self.width:
            raise ConfigError("lanes do not fit in the image width")
        if self.marking_width % 2 or any(w % 2 for w in self.vehicle_width):
            # even widths put the bottom-centre and marking centreline on
            # integer columns, so the crossing frame is exact
            raise ConfigError("vehicle and marking widths must be even")
        lo, hi = self.event_frame
        if not 0 < lo <= hi < self.frames_per_scenario:
            raise ConfigError("event_frame range must lie inside the scenario")
        if not 0 < self.lateral_speed[0] <= self.lateral_speed[1]:
            raise ConfigError("lateral_speed range must be positive")
        if self.lateral_speed[0] < 1.0 and self.n_llc + self.n_rlc:
            raise ConfigError("lateral_speed below 1 px/frame blurs the crossing frame")
        if self.frame_rate <= 0:
            raise ConfigError("frame_rate must be > 0")

    def lane_left_edge(self) -> int:
        return (self.width - self.lane_count * self.lane_width) // 2

    def marking_columns(self) -> list[int]:
        """Centre columns of every marking, road edges included."""
        left = self.lane_left_edge()
        return [left + i * self.lane_width for i in range(self.lane_count + 1)]

    def lane_center(self, lane: int) -> float:
        return self.lane_left_edge() + (lane + 0.5) * self.lane_width

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass
class Scenario:
    index: int
    label: Maneuver
    lane: int
    vehicle_width: int
    vehicle_height: int
    # continuous bottom-centre x per local frame
    centers: np.ndarray
    marking_x: float | None = None
    event_local: int | None = None
    color: tuple[int, int, int] = (0, 0, 0)
    lefts: np.ndarray = field(init=False)

    def __post_init__(self):
        # integer left edge, rounded half away from zero
        raw = self.centers - self.vehicle_width / 2
        self.lefts = (np.sign(raw) * np.floor(np.abs(raw) + 0.5)).astype(np.int64)

    def bottom_centers(self) -> np.ndarray:
        """Bottom-centre x of the rendered rectangle per local frame."""
        return self.lefts + self.vehicle_width / 2


def _scenario_rng(seed: int, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, stream])


def plan_scenarios(config: SynthConfig, seed: int) -> list[Scenario]:
    """Draw the per-scenario kinematics; pure function of (config, seed)."""
    labels = (
        [Maneuver.NLC] * config.n_nlc
        + [Maneuver.LLC] * config.n_llc
        + [Maneuver.RLC] * config.n_rlc
    )
    order = np.random.default_rng([seed, 0xC1A55]).permutation(len(labels))
    labels = [labels[i] for i in order]
    F = config.frames_per_scenario
    t = np.arange(F, dtype=np.float64)
    markings = config.marking_columns()
    plan = []
    for k, label in enumerate(labels):
        rng = _scenario_rng(seed, k, 0)
        w = 2 * int(rng.integers(config.vehicle_width[0] // 2, config.vehicle_width[1] // 2 + 1))
        h = int(rng.integers(config.vehicle_height[0], config.vehicle_height[1] + 1))
        color = tuple(int(c) for c in rng.integers(40, 220, size=3))
        if label == Maneuver.NLC:
            lane = int(rng.integers(0, config.lane_count))
            offset = rng.uniform(-config.nlc_offset, config.nlc_offset)
            drift = rng.uniform(-config.nlc_drift, config.nlc_drift)
            centers = config.lane_center(lane) + offset + drift * t
            plan.append(Scenario(k, label, lane, w, h, centers, color=color))
            continue
        # LLC moves towards smaller x and needs a lane on its left
        direction = -1.0 if label == Maneuver.LLC else 1.0
        if label == Maneuver.LLC:
            lane = int(rng.integers(1, config.lane_count))
            marking = markings[lane]
        else:
            lane = int(rng.integers(0, config.lane_count - 1))
            marking = markings[lane + 1]
        speed = rng.uniform(*config.lateral_speed)
        event = int(rng.integers(config.event_frame[0], config.event_frame[1] + 1))
        center = config.lane_center(lane)
        start = event - abs(marking - center) / speed
        lateral = marking + direction * speed * (t - event)
        centers = np.where(t < start, center, lateral)
        sc = Scenario(k, label, lane, w, h, centers, float(marking), None, color)
        sc.event_local = crossing_frame(sc.bottom_centers(), marking, direction)
        plan.append(sc)
    return plan


def crossing_frame(bottom_x: np.ndarray, marking_x: float, direction: float) -> int:
    """First frame whose bottom-centre is on or past the marking."""
    past = direction * (np.asarray(bottom_x) - marking_x) >= 0
    hits = np.flatnonzero(past)
    if hits.size == 0:
        raise ConfigError("vehicle never crosses the marking; widen the scenario")
    return int(hits[0])


def _smooth_noise(rng: np.random.Generator, shape, contrast: float) -> np.ndarray:
    """Band-limited noise in roughly [-contrast, contrast]."""
    noise = rng.standard_normal(shape)
    k = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    for axis in range(2):
        padded = np.pad(noise, [(2, 2) if a == axis else (0, 0) for a in range(2)], mode="wrap")
        n = noise.shape[axis]
        noise = sum(w * np.take(padded, np.arange(i, i + n), axis=axis) for i, w in enumerate(k))
    noise /= noise.std() + 1e-12
    return np.clip(noise * contrast / 2.0, -contrast, contrast)


class SyntheticFrames:
    """Frame source rendering synthetic frames on demand."""

    def __init__(self, config: SynthConfig, seed: int, plan: list[Scenario]):
        self.config = config
        self.seed = seed
        self.plan = plan
        self._textures = lru_cache(maxsize=8)(self._make_textures)

    def __len__(self):
        return self.config.frame_count

    def _make_textures(self, k: int):
        c = self.config
        rng = _scenario_rng(self.seed, k, 1)
        road_rows = c.height - c.horizon_row
        road = 110.0 + _smooth_noise(
            rng, (road_rows + c.ego_speed * c.frames_per_scenario, c.width), c.texture_contrast
        )
        sky = 170.0 + _smooth_noise(rng, (c.horizon_row, c.width), c.texture_contrast * 0.6)
        sc = self.plan[k]
        body = _smooth_noise(rng, (sc.vehicle_height, sc.vehicle_width), c.texture_contrast)
        vehicle = np.clip(np.asarray(sc.color, np.float64)[None, None, :] + body[..., None], 0, 255)
        return road, sky, vehicle

    def __getitem__(self, index: int) -> np.ndarray:
        c = self.config
        if not 0 <= index < len(self):
            raise IndexError(index)
        k, t = divmod(index, c.frames_per_scenario)
        road_tex, sky, vehicle = self._textures(k)
        road_rows = c.height - c.horizon_row
        offset = c.ego_speed * (c.frames_per_scenario - 1 - t)
        road = road_tex[offset : offset + road_rows].copy()
        if c.marking_contrast:
            tex_rows = np.arange(offset, offset + road_rows)
            dash = (tex_rows // (c.dash_period // 2)) % 2 == 0
            half = c.marking_width // 2
            for m in c.marking_columns():
                lo, hi = max(m - half, 0), min(m + half, c.width)
                if lo >= hi:
                    continue
                seg = road[:, lo:hi]
                seg[dash] += c.marking_contrast * (235.0 - seg[dash])
        gray = np.concatenate([sky, road], axis=0)
        img = np.repeat(gray[..., None], 3, axis=2)
        img[: c.horizon_row, :, 2] += 25.0
        sc = self.plan[k]
        left = int(sc.lefts[t])
        top = c.vehicle_bottom_row - sc.vehicle_height
        x0, x1 = max(left, 0), min(left + sc.vehicle_width, c.width)
        if x0 < x1:
            img[top : c.vehicle_bottom_row, x0:x1] = vehicle[:, x0 - left : x1 - left]
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def vehicle_contour(sc: Scenario, t: int, config: SynthConfig) -> tuple:
    left = float(sc.lefts[t])
    right = left + sc.vehicle_width
    bottom = float(config.vehicle_bottom_row)
    top = bottom - sc.vehicle_height
    return ((left, top), (right, top), (right, bottom), (left, bottom))


def generate_synthetic(config: SynthConfig, seed: int) -> Recording:
    """Build a lazily rendered synthetic recording."""
    config.validate()
    plan = plan_scenarios(config, seed)
    F = config.frames_per_scenario
    tracks, events = {}, []
    for sc in plan:
        vid = sc.index + 1
        base = sc.index * F
        obs = [
            ContourObservation(base + t, vid, vehicle_contour(sc, t, config)) for t in range(F)
        ]
        tracks[vid] = TrackedVehicle(vid, obs)
        if sc.label != Maneuver.NLC:
            events.append(ManeuverEvent(vid, sc.label, base + sc.event_local))
    return Recording(
        frames=SyntheticFrames(config, seed, plan),
        frame_rate=config.frame_rate,
        width=config.width,
        height=config.height,
        tracks=tracks,
        events=events,
        name=config.name,
    )
