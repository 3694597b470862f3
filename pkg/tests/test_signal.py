"""Photometry to bits: hue/intensity classification, blobs, tracking."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flashtrack.signal import (
    Detection,
    FlashSample,
    HueBitizer,
    IntensityBitizer,
    NoTransitionError,
    SampleTrace,
    associate,
    classify_hue,
    classify_intensity,
    detect_flashes,
    read_trace_csv,
    write_trace_csv,
)


class TestClassifyHue:
    def test_near_reference_hues(self):
        assert classify_hue([5.0, 238.0, 2.0]) == [1, 0, 1]

    def test_boundary_tie_breaks_to_zero(self):
        assert classify_hue([120.0]) == [0]

    def test_circular_wraparound(self):
        # 350 degrees is 10 degrees from red, far from blue
        assert classify_hue([350.0]) == [1]

    def test_monte_carlo_misclassification_rate(self):
        rng = np.random.default_rng(42)
        n = 10**5
        red = rng.normal(0.0, 15.0, n) % 360.0
        blue = (rng.normal(240.0, 15.0, n)) % 360.0
        errs = classify_hue(red).count(0) + classify_hue(blue).count(1)
        assert errs / (2 * n) < 1e-3


class TestClassifyIntensity:
    def test_clean_square_wave(self):
        assert classify_intensity([10, 10, 90, 90, 10]) == [0, 0, 1, 1, 0]

    def test_flat_input_raises(self):
        with pytest.raises(NoTransitionError):
            classify_intensity([10, 10, 10, 10])

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            classify_intensity([10])

    def test_square_wave_with_linear_drift(self):
        rng = np.random.default_rng(0)
        bits_true = [0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0]
        for trial in range(20):
            start = rng.integers(0, 12)
            window = [
                (80.0 if bits_true[(start + i) % 12] else 0.0) + 5.0 * i + 30.0
                for i in range(12)
            ]
            got = classify_intensity(window)
            want = [bits_true[(start + i) % 12] for i in range(12)]
            assert got == want, (trial, window)

    @given(
        st.floats(0.1, 50.0),
        st.floats(-100.0, 100.0),
        st.permutations([0, 0, 1, 1, 0, 1]),
    )
    @settings(max_examples=200)
    def test_affine_invariance(self, scale, shift, bits):
        if len(set(bits)) < 2:
            return
        base = [10.0 + 80.0 * b for b in bits]
        scaled = [scale * x + shift for x in base]
        assert classify_intensity(base) == classify_intensity(scaled)


class TestIntensityBitizer:
    def test_backlog_flushes_at_first_transition(self):
        biti = IntensityBitizer(8)
        out = []
        for x in [10, 10, 10, 10, 90]:
            out.extend(biti.push(x))
        assert out == [0, 0, 0, 0, 1]

    def test_steady_state_emits_one_bit_per_sample(self):
        biti = IntensityBitizer(8)
        for x in [10, 10, 10, 10, 90]:
            biti.push(x)
        assert biti.push(90.0) == [1]
        assert biti.push(10.0) == [0]

    def test_all_words_all_phases_clean(self, robust_books):
        book, _ = robust_books[8]
        for ident in range(1, len(book) + 1):
            bits_true = list(book.word(ident).bits)
            for phase in range(8):
                biti = IntensityBitizer(8)
                emitted, truth = [], []
                for i in range(24):
                    b = bits_true[(phase + i) % 8]
                    truth.append(b)
                    emitted.extend(biti.push(100.0 if b else 20.0))
                assert emitted == truth[-len(emitted) :], (ident, phase)

    def test_noise_only_prefix_stays_silent(self):
        rng = np.random.default_rng(0)
        silent = 0
        for _ in range(300):
            biti = IntensityBitizer(12)
            if not any(biti.push(20.0 + rng.normal(0.0, 2.0)) for _ in range(12)):
                silent += 1
        # the startup gate keeps almost all pure-noise prefixes quiet
        assert silent >= 280

    def test_noisy_signal_still_classified_exactly(self):
        rng = np.random.default_rng(5)
        bits_true = [0, 0, 0, 1, 0, 1, 1, 1]
        biti = IntensityBitizer(8)
        emitted, truth = [], []
        for i in range(32):
            b = bits_true[i % 8]
            truth.append(b)
            # 5 percent of the 80-unit gap, the documented noise budget
            emitted.extend(biti.push((100.0 if b else 20.0) + rng.normal(0, 4.0)))
        assert emitted == truth[-len(emitted) :]

    def test_window_too_short_rejected(self):
        with pytest.raises(ValueError):
            IntensityBitizer(1)


class TestHueBitizer:
    def test_one_bit_per_sample_from_first_push(self):
        biti = HueBitizer()
        assert biti.push(3.0) == [1]
        assert biti.push(241.0) == [0]


class TestDetectFlashes:
    @staticmethod
    def render_blob(frame, row, col, peak, sigma=1.0):
        rr, cc = np.mgrid[0 : frame.shape[0], 0 : frame.shape[1]]
        frame += peak * np.exp(-((rr - row) ** 2 + (cc - col) ** 2) / (2 * sigma**2))

    def test_single_gaussian_blob_centroid(self):
        frame = np.zeros((16, 16))
        self.render_blob(frame, 5.0, 7.0, 100.0)
        dets = detect_flashes(frame, threshold=10.0, nms_radius=2.0)
        assert len(dets) == 1
        assert abs(dets[0].pixel[0] - 5.0) < 0.05
        assert abs(dets[0].pixel[1] - 7.0) < 0.05

    def test_empty_frame(self):
        assert detect_flashes(np.zeros((8, 8)), threshold=1.0, nms_radius=2.0) == []

    def test_close_blobs_suppressed_keeping_brighter(self):
        frame = np.zeros((12, 12))
        frame[5, 5] = 50.0
        frame[6, 6] = 80.0  # diagonal neighbour: separate 4-connected blob
        dets = detect_flashes(frame, threshold=10.0, nms_radius=3.0)
        assert len(dets) == 1
        assert dets[0].pixel == (6.0, 6.0)
        assert dets[0].intensity == 80.0

    def test_distant_blobs_both_kept(self):
        frame = np.zeros((16, 16))
        frame[2, 2] = 50.0
        frame[12, 12] = 60.0
        dets = detect_flashes(frame, threshold=10.0, nms_radius=3.0)
        assert len(dets) == 2

    def test_hue_grid_averaged_per_blob(self):
        frame = np.zeros((8, 8))
        frame[3, 3] = frame[3, 4] = 90.0
        hue = np.zeros((8, 8))
        hue[3, 3], hue[3, 4] = 10.0, 20.0
        dets = detect_flashes(frame, threshold=10.0, nms_radius=2.0, hue=hue)
        assert len(dets) == 1
        assert dets[0].hue == pytest.approx(15.0)

    def test_centroid_error_under_noise(self):
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(50):
            frame = np.zeros((16, 16))
            self.render_blob(frame, 8.0, 6.0, 100.0)
            frame += rng.normal(0.0, 1.0, frame.shape)  # SNR 100
            dets = detect_flashes(frame, threshold=25.0, nms_radius=2.0)
            assert len(dets) == 1
            worst = max(
                worst,
                float(np.hypot(dets[0].pixel[0] - 8.0, dets[0].pixel[1] - 6.0)),
            )
        assert worst < 0.1


class TestAssociate:
    def test_match_within_gate(self):
        tr = SampleTrace(track_id=1)
        tr.append(FlashSample(0.0, 50.0, 0.0, (10.0, 10.0)))
        out = associate([tr], [Detection((10.4, 10.1), 60.0, 0.0)], 2.0, 1.0)
        assert len(out) == 1
        assert len(out[0].samples) == 2
        assert out[0].last_pixel == (10.4, 10.1)

    def test_detection_outside_gate_opens_new_track(self):
        tr = SampleTrace(track_id=1)
        tr.append(FlashSample(0.0, 50.0, 0.0, (10.0, 10.0)))
        out = associate([tr], [Detection((30.0, 30.0), 60.0, 0.0)], 2.0, 1.0)
        ids = {t.track_id for t in out}
        assert len(out) == 2 and 1 in ids

    def test_crossing_matches_minimize_total_distance(self):
        a = SampleTrace(track_id=1)
        a.append(FlashSample(0.0, 50.0, 0.0, (10.0, 10.0)))
        b = SampleTrace(track_id=2)
        b.append(FlashSample(0.0, 50.0, 0.0, (10.0, 12.0)))
        dets = [Detection((10.0, 10.6), 60.0, 0.0), Detection((10.0, 11.6), 60.0, 0.0)]
        out = associate([a, b], dets, 3.0, 1.0)
        pix = {t.track_id: t.last_pixel for t in out}
        paired = sum(
            np.hypot(pix[t][0] - p0[0], pix[t][1] - p0[1])
            for t, p0 in [(1, (10.0, 10.0)), (2, (10.0, 12.0))]
        )
        swapped = (
            np.hypot(10.0 - 10.0, 11.6 - 10.0) + np.hypot(10.0 - 10.0, 10.6 - 12.0)
        )
        assert paired <= swapped

    def test_track_missing_twice_is_closed(self):
        tr = SampleTrace(track_id=1)
        tr.append(FlashSample(0.0, 50.0, 0.0, (10.0, 10.0)))
        out = associate([tr], [], 2.0, 1.0)
        assert len(out) == 1 and out[0].missed == 1
        out = associate(out, [], 2.0, 2.0)
        assert out == []

    def test_timestamps_must_increase(self):
        tr = SampleTrace(track_id=1)
        tr.append(FlashSample(1.0, 50.0, 0.0, (10.0, 10.0)))
        with pytest.raises(ValueError):
            tr.append(FlashSample(1.0, 50.0, 0.0, (10.0, 10.0)))


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        a = SampleTrace(track_id=2)
        a.append(FlashSample(0.1, 55.5, 3.25, (10.125, 11.5)))
        a.append(FlashSample(0.2, 44.5, 241.0, (10.25, 11.75)))
        b = SampleTrace(track_id=7)
        b.append(FlashSample(0.15, 80.0, 0.0, (3.0, 4.0)))
        path = tmp_path / "trace.csv"
        write_trace_csv(path, [a, b])
        back = read_trace_csv(path)
        assert [t.track_id for t in back] == [2, 7]
        assert back[0].samples[0].t == 0.1
        assert back[0].samples[1].pixel == (10.25, 11.75)
        assert back[1].samples[0].intensity == 80.0
