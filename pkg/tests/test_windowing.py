import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maneuver_net.errors import FormatError, OutOfRangeError, ValidationError
from maneuver_net.ingest import ArrayFrames, ContourObservation, Maneuver, ManeuverEvent, Recording, build_tracks
from maneuver_net.synth import SynthConfig, generate_synthetic
from maneuver_net.windowing import (
    SampleWindow,
    WindowSpec,
    enumerate_event_samples,
    enumerate_nlc_samples,
    enumerate_samples,
    read_manifest,
    stratified_split,
    temporal_resample,
    window_indices,
    write_manifest,
)

SQUARE = ((0, 0), (4, 0), (4, 4))


def recording(tracks: dict[int, range], events=(), n=None):
    obs = [ContourObservation(f, v, SQUARE) for v, frames in tracks.items() for f in frames]
    n = n or max(max(r) for r in tracks.values()) + 1
    return Recording(ArrayFrames(np.zeros((n, 4, 4, 3), np.uint8)), 10.0, 4, 4, build_tracks(obs),
                     [ManeuverEvent(v, Maneuver[l], e) for v, l, e in events], name="w")


class TestWindowIndices:
    @pytest.mark.parametrize("n,tte,expect", [(20, 0, (81, 100)), (20, 10, (71, 90)), (40, 20, (41, 80))])
    def test_examples(self, n, tte, expect):
        assert window_indices(100, WindowSpec(n, tte)) == expect

    def test_insufficient_history(self):
        with pytest.raises(OutOfRangeError):
            window_indices(15, WindowSpec(20, 0))

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            WindowSpec(0, 0)
        with pytest.raises(ValidationError):
            WindowSpec(20, -1)
        with pytest.raises(ValidationError):
            WindowSpec(20, 0, 5)
        assert WindowSpec(30, 10).is_standard and not WindowSpec(25, 0).is_standard


class TestEventSamples:
    def test_one_event(self):
        rec = recording({1: range(0, 70)}, [(1, "LLC", 60)])
        (w,) = enumerate_event_samples(rec, WindowSpec(40, 20))
        assert (w.start, w.end, w.label) == (1, 40, Maneuver.LLC)

    def test_short_history_skipped(self, caplog):
        rec = recording({1: range(0, 30)}, [(1, "RLC", 15)])
        caplog.set_level("INFO")
        assert enumerate_event_samples(rec, WindowSpec(20, 0)) == []
        assert "lacks history" in caplog.text

    def test_gap_skipped(self):
        rec = recording({1: [*range(0, 10), *range(12, 40)]}, [(1, "RLC", 25)])
        assert enumerate_event_samples(rec, WindowSpec(20, 0)) == []

    def test_count_equals_event_scan(self):
        cfg = SynthConfig(n_nlc=3, n_llc=5, n_rlc=4)
        rec = generate_synthetic(cfg, seed=11)
        spec = WindowSpec(20, 10)
        samples = enumerate_event_samples(rec, spec)
        scan = sum(1 for e in rec.events if e.event_frame - 10 - 19 >= rec.tracks[e.vehicle_id].first_frame)
        assert len(samples) == scan == 9
        for s in samples:
            assert s.end == s.event_frame - spec.tte and s.length == 20
            assert (s.event_frame in s.frame_indices) == (spec.tte == 0)


class TestNlcSamples:
    def test_event_free_track(self):
        rec = recording({1: range(0, 60)})
        got = [(w.start, w.end) for w in enumerate_nlc_samples(rec, WindowSpec(20), stride=20)]
        assert got == [(0, 19), (20, 39), (40, 59)]

    def test_exclusion_zone(self):
        rec = recording({1: range(0, 300)}, [(1, "LLC", 150)])
        ws = enumerate_nlc_samples(rec, WindowSpec(20), stride=5, exclusion_margin=40)
        assert ws
        assert all(w.end < 110 or w.start > 190 for w in ws)

    def test_stride_validation(self):
        with pytest.raises(ValidationError):
            enumerate_nlc_samples(recording({1: range(30)}), WindowSpec(20), stride=0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(10, 40), st.integers(1, 25), st.integers(0, 60),
           st.lists(st.integers(0, 399), max_size=4, unique=True))
    def test_never_touches_exclusion_zone(self, n, stride, margin, event_frames):
        events = [(1, "LLC", e) for e in event_frames]
        rec = recording({1: range(0, 400), 2: range(100, 250)}, events)
        for w in enumerate_nlc_samples(rec, WindowSpec(n), stride, margin):
            assert w.length == n
            for e in event_frames if w.vehicle_id == 1 else []:
                # brute force: no frame of the window lies in [e - margin, e + margin]
                assert not any(e - margin <= f <= e + margin for f in w.frame_indices)


def synthetic_windows(n_nlc=100, n_llc=20, n_rlc=20):
    out = []
    for i in range(n_nlc):
        out.append(SampleWindow("r", 1000 + i // 2, 20 * (i % 2), 20 * (i % 2) + 19, Maneuver.NLC))
    for i in range(n_llc):
        out.append(SampleWindow("r", i, 0, 19, Maneuver.LLC, 40))
    for i in range(n_rlc):
        out.append(SampleWindow("r", 500 + i, 0, 19, Maneuver.RLC, 40))
    return out


class TestSplit:
    def test_fractions(self):
        split = stratified_split(synthetic_windows(), 0.15, seed=1)
        val = {m: sum(w.label == m for w in split.val) for m in Maneuver}
        assert abs(val[Maneuver.NLC] - 15) <= 1
        assert abs(val[Maneuver.LLC] - 3) <= 1 and abs(val[Maneuver.RLC] - 3) <= 1
        assert len(split.train) + len(split.val) == 140

    def test_deterministic(self):
        a = stratified_split(synthetic_windows(), seed=4)
        b = stratified_split(synthetic_windows(), seed=4)
        assert a.train == b.train and a.val == b.val
        c = stratified_split(synthetic_windows(), seed=5)
        assert c.val != a.val

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 60), st.integers(1, 30))
    def test_groups_never_straddle(self, seed, n_nlc, n_ev):
        windows = synthetic_windows(n_nlc, n_ev, n_ev)
        split = stratified_split(windows, 0.15, seed)
        train_groups = {w.group for w in split.train}
        assert not train_groups & {w.group for w in split.val}
        assert sorted(map(repr, split.train + split.val)) == sorted(map(repr, windows))

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, bad):
        with pytest.raises(ValidationError):
            stratified_split(synthetic_windows(), bad)


class TestResample:
    def test_endpoints(self):
        out = temporal_resample(range(20), 16)
        assert out[0] == 0 and out[-1] == 19 and len(out) == 16
        assert all(b > a for a, b in zip(out, out[1:]))

    def test_identity(self):
        assert temporal_resample(range(16), 16) == list(range(16))

    @pytest.mark.parametrize("n,m", [(40, 16), (20, 64), (7, 3), (128, 16)])
    def test_nearest_linear_spacing(self, n, m):
        expect = []
        for i in range(m):
            pos = i * (n - 1) / (m - 1)
            # nearest integer, halves away from zero
            lo = int(pos)
            expect.append(lo + 1 if pos - lo >= 0.5 else lo)
        assert temporal_resample(list(range(100, 100 + n)), m) == [100 + e for e in expect]

    def test_errors(self):
        with pytest.raises(ValidationError):
            temporal_resample([], 4)
        with pytest.raises(ValidationError):
            temporal_resample([1], 0)


class TestManifest:
    def test_round_trip(self, tmp_path):
        ws = synthetic_windows(4, 2, 2)
        p = write_manifest(tmp_path / "m.csv", ws, 3)
        back, scale = read_manifest(p)
        assert scale == 3
        assert [(w.recording, w.vehicle_id, w.start, w.end, w.label) for w in back] == \
               [(w.recording, w.vehicle_id, w.start, w.end, w.label) for w in ws]
        assert p.read_text().splitlines()[0] == "recording,vehicle_id,start,end,label,scale"

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(FormatError):
            read_manifest(p)

    def test_missing(self, tmp_path):
        with pytest.raises(FormatError):
            read_manifest(tmp_path / "none.csv")

    def test_all_samples_from_synthetic(self):
        rec = generate_synthetic(SynthConfig(n_nlc=2, n_llc=1, n_rlc=1), seed=7)
        ws = enumerate_samples(rec, WindowSpec(20, 0))
        labels = sorted(w.label.name for w in ws)
        assert labels == ["LLC", "NLC", "NLC", "NLC", "NLC", "RLC"]
