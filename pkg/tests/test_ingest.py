import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maneuver_net.errors import ConfigError, FormatError, ValidationError
from maneuver_net.ingest import (
    ArrayFrames,
    ContourObservation,
    Maneuver,
    ManeuverEvent,
    Recording,
    TrackedVehicle,
    build_tracks,
    parse_recording,
    recording_index,
    write_recording,
)
from maneuver_net.stats import PREVENTION_STATS, DatasetStats, dataset_stats
from maneuver_net.synth import SynthConfig, crossing_frame, generate_synthetic, plan_scenarios
from maneuver_net.windowing import WindowSpec


def box(x, y, w=10, h=8):
    return ((x, y), (x + w, y), (x + w, y + h), (x, y + h))


def two_vehicle_recording(frames=30):
    obs = [ContourObservation(f, 1, box(10 + f, 20)) for f in range(frames)]
    obs += [ContourObservation(f, 2, box(40, 5.5)) for f in range(5, 25)]
    pixels = np.random.default_rng(0).integers(0, 256, (frames, 24, 32, 3), dtype=np.uint8)
    return Recording(ArrayFrames(pixels), 10.0, 32, 24, build_tracks(obs),
                     [ManeuverEvent(1, Maneuver.LLC, 15)], name="two")


class TestTypes:
    def test_contour_needs_three_points(self):
        with pytest.raises(ValidationError, match="frame 4, vehicle 9"):
            ContourObservation(4, 9, ((0, 0), (1, 1)))

    def test_track_frames_strictly_increasing(self):
        a = ContourObservation(3, 1, box(0, 0))
        b = ContourObservation(3, 1, box(1, 0))
        with pytest.raises(ValidationError):
            TrackedVehicle(1, [a, b])
        with pytest.raises(ValidationError):
            TrackedVehicle(1, [])

    def test_duplicate_observation_rejected(self):
        obs = [ContourObservation(3, 1, box(0, 0)), ContourObservation(3, 1, box(1, 0))]
        with pytest.raises(ValidationError, match="duplicate"):
            build_tracks(obs)

    def test_event_label_must_be_lane_change(self):
        with pytest.raises(ValidationError):
            ManeuverEvent(1, Maneuver.NLC, 3)

    def test_event_outside_track_range(self):
        rec = two_vehicle_recording()
        with pytest.raises(ValidationError, match="outside"):
            Recording(rec.frames, 10.0, 32, 24, rec.tracks, [ManeuverEvent(2, Maneuver.RLC, 28)])

    def test_event_for_unknown_vehicle(self):
        rec = two_vehicle_recording()
        with pytest.raises(ValidationError, match="unknown vehicle"):
            Recording(rec.frames, 10.0, 32, 24, rec.tracks, [ManeuverEvent(5, Maneuver.RLC, 3)])

    def test_observation_beyond_frame_count(self):
        rec = two_vehicle_recording(frames=30)
        with pytest.raises(ValidationError):
            Recording(ArrayFrames(np.zeros((10, 24, 32, 3), np.uint8)), 10.0, 32, 24, rec.tracks, [])

    def test_frame_rate_positive(self):
        rec = two_vehicle_recording()
        with pytest.raises(ValidationError):
            Recording(rec.frames, 0.0, 32, 24, rec.tracks, [])

    def test_maneuver_parse(self):
        assert Maneuver.parse(" llc ") is Maneuver.LLC
        with pytest.raises(ValidationError):
            Maneuver.parse("UTURN")

    def test_duplicate_recording_names(self):
        rec = two_vehicle_recording()
        with pytest.raises(ValidationError):
            recording_index([rec, rec])


class TestInterchange:
    def test_round_trip(self, tmp_path):
        rec = two_vehicle_recording()
        back = parse_recording(write_recording(rec, tmp_path / "r"))
        assert back == rec
        assert len(back.tracks) == 2 and len(back.events) == 1
        assert back.name == "two"

    def test_files_are_documented_layout(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        meta = json.loads((root / "meta.json").read_text())
        assert {"frame_rate", "width", "height"} <= set(meta)
        assert (root / "frames" / "000000.png").is_file()
        assert (root / "tracks.csv").read_text().startswith("frame,vehicle_id,x0,y0,x1,y1")
        assert (root / "events.csv").read_text().splitlines()[0] == "vehicle_id,label,event_frame"

    @pytest.mark.parametrize("name", ["meta.json", "tracks.csv", "events.csv"])
    def test_missing_file(self, tmp_path, name):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        (root / name).unlink()
        with pytest.raises(FormatError):
            parse_recording(root)

    def test_unknown_vehicle_in_events(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        (root / "events.csv").write_text("vehicle_id,label,event_frame\n7,LLC,10\n")
        with pytest.raises(ValidationError):
            parse_recording(root)

    def test_unknown_label(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        (root / "events.csv").write_text("vehicle_id,label,event_frame\n1,STOP,10\n")
        with pytest.raises(ValidationError):
            parse_recording(root)

    def test_duplicated_track_row(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        lines = (root / "tracks.csv").read_text().splitlines()
        (root / "tracks.csv").write_text("\n".join(lines + [lines[1]]) + "\n")
        with pytest.raises(ValidationError, match="duplicate"):
            parse_recording(root)

    def test_short_contour_row_names_frame(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        with (root / "tracks.csv").open("a") as fh:
            fh.write("29,2,1,1,2,2\n")
        with pytest.raises(ValidationError, match="frame 29, vehicle 2"):
            parse_recording(root)

    def test_odd_coordinate_count(self, tmp_path):
        root = write_recording(two_vehicle_recording(), tmp_path / "r")
        with (root / "tracks.csv").open("a") as fh:
            fh.write("29,2,1,1,2,2,3\n")
        with pytest.raises(FormatError):
            parse_recording(root)

    @settings(max_examples=25, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.integers(0, 11),
                st.integers(1, 4),
                st.lists(st.tuples(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False)),
                         min_size=3, max_size=6),
            ),
            min_size=1, max_size=20, unique_by=lambda r: (r[0], r[1]),
        )
    )
    def test_round_trip_property(self, tmp_path_factory, rows):
        obs = [ContourObservation(f, v, tuple(pts)) for f, v, pts in rows]
        tracks = build_tracks(obs)
        events = [ManeuverEvent(v, Maneuver.RLC, t.first_frame) for v, t in tracks.items() if v % 2]
        frames = np.random.default_rng(len(rows)).integers(0, 256, (12, 6, 7, 3), dtype=np.uint8)
        rec = Recording(ArrayFrames(frames), 25.0, 7, 6, tracks, events, name="p")
        root = write_recording(rec, tmp_path_factory.mktemp("rt"))
        assert parse_recording(root) == rec


class TestSynthetic:
    def test_counts_follow_config(self, small_recording):
        labels = sorted(e.label.name for e in small_recording.events)
        assert labels == ["LLC", "RLC"]
        assert len(small_recording.tracks) == 4

    def test_pure_function_of_config_and_seed(self, small_config, small_recording):
        again = generate_synthetic(small_config, seed=7)
        assert again == small_recording

    def test_seed_changes_output(self, small_config, small_recording):
        other = generate_synthetic(small_config, seed=8)
        assert not np.array_equal(other.frames[3], small_recording.frames[3])

    def test_event_is_first_crossing_frame(self):
        cfg = SynthConfig(n_nlc=0, n_llc=6, n_rlc=6)
        rec = generate_synthetic(cfg, seed=3)
        markings = cfg.marking_columns()
        for ev in rec.events:
            track = rec.tracks[ev.vehicle_id]
            # bottom-centre from the annotated contour, scanned frame by frame
            centers = {f: (track.at(f).points()[:, 0].min() + track.at(f).points()[:, 0].max()) / 2
                       for f in track.frames()}
            start = centers[track.first_frame]
            sign = -1 if ev.label == Maneuver.LLC else 1
            crossed = [m for m in markings if sign * (m - start) > 0]
            marking = min(crossed, key=lambda m: abs(m - start))
            first = min(f for f, c in centers.items() if sign * (c - marking) >= 0)
            assert ev.event_frame == first
            assert abs(centers[ev.event_frame] - marking) <= 1.0 + 1e-9

    def test_nlc_stays_in_lane(self):
        cfg = SynthConfig(n_nlc=10, n_llc=0, n_rlc=0, lane_count=2)
        for sc in plan_scenarios(cfg, seed=1):
            c = sc.bottom_centers()
            lane_lo = cfg.lane_left_edge() + sc.lane * cfg.lane_width
            assert (c - sc.vehicle_width / 2 > lane_lo - cfg.lane_width / 2).all()
            assert np.all(np.abs(c - cfg.lane_center(sc.lane)) < cfg.lane_width / 2)

    def test_crossing_frame_without_crossing(self):
        with pytest.raises(ConfigError):
            crossing_frame(np.array([1.0, 2.0]), 10.0, 1.0)

    @pytest.mark.parametrize("bad", [
        {"frames_per_scenario": 0},
        {"n_nlc": 0, "n_llc": 0, "n_rlc": 0},
        {"lane_count": 1},
        {"vehicle_width": (35, 41)},
    ])
    def test_invalid_config(self, bad):
        with pytest.raises(ConfigError):
            SynthConfig(**bad)

    def test_config_file_round_trip(self, tmp_path):
        cfg = SynthConfig(n_nlc=3, marking_contrast=0.0)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert SynthConfig.from_file(p) == cfg
        p.write_text('{"warp_speed": 9}')
        with pytest.raises(ConfigError):
            SynthConfig.from_file(p)


class TestStats:
    def test_counts_match_plan(self):
        cfg = SynthConfig(n_nlc=5, n_llc=3, n_rlc=4)
        rec = generate_synthetic(cfg, seed=2)
        stats = dataset_stats([rec], WindowSpec(obs_horizon=20))
        scan = {m.name: 0 for m in Maneuver}
        for e in rec.events:
            scan[e.label.name] += 1
        assert stats.counts["LLC"] == scan["LLC"] == 3
        assert stats.counts["RLC"] == scan["RLC"] == 4
        # event-free tracks are one lane-keeping sequence each
        assert stats.counts["NLC"] == 5
        assert stats.mean_frames["NLC"] == cfg.frames_per_scenario

    def test_empty_input(self):
        s = dataset_stats([])
        assert s.counts == {"NLC": 0, "LLC": 0, "RLC": 0}

    def test_reference_table_rendering(self):
        text = DatasetStats.from_dict(PREVENTION_STATS).render()
        assert "3110" in text and "342" in text and "438" in text
        assert "50.9" in text and "96.8" in text and "80.1" in text
