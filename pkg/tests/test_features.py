"""Featurizer tests: mel pipeline, gesture statistics, 10 Hz alignment."""

import math
import statistics

import numpy as np
import pytest

from rtsfuse.errors import InvalidInputError
from rtsfuse.features import (
    LOG_FLOOR,
    StreamingFeaturizer,
    build_mel_filterbank,
    gesture_featurize,
    gesture_tick_frames,
    hz_to_mel,
    mel_featurize,
    mel_frame_count,
    mel_to_hz,
    streaming_featurize,
)


class TestMelFilterbank:
    def test_centers_monotonically_increasing(self):
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), 42))
        assert np.all(np.diff(edges) > 0)

    def test_interior_bins_have_positive_weight(self):
        fb = build_mel_filterbank()
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), 42))
        bin_freqs = np.arange(fb.shape[1]) * (16000 / 512)
        inside = (bin_freqs > edges[1]) & (bin_freqs < edges[-2])
        assert np.all(fb.sum(axis=0)[inside] > 0)

    def test_pure_tone_peaks_in_own_band(self):
        centers = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), 42))[1:-1]
        t = np.arange(16000) / 16000.0
        for k in range(0, 40, 3):  # every third band keeps the test quick
            tone = 0.5 * np.sin(2 * np.pi * centers[k] * t).astype(np.float32)
            frames, _ = mel_featurize(tone)
            assert int(np.argmax(frames.mean(axis=0))) == k

    def test_too_small_fft_raises(self):
        with pytest.raises(InvalidInputError, match="too small"):
            build_mel_filterbank(n_filters=40, fft_size=64)


class TestMelFeaturize:
    def test_one_second_yields_98_frames(self):
        frames, times = mel_featurize(np.zeros(16000, dtype=np.float32))
        assert frames.shape == (98, 40)
        assert mel_frame_count(16000) == (16000 - 400) // 160 + 1 == 98
        assert times[0] == 0.0 and abs(times[1] - 0.01) < 1e-12

    def test_silence_hits_log_floor(self):
        frames, _ = mel_featurize(np.zeros(8000, dtype=np.float32))
        np.testing.assert_allclose(frames, math.log(LOG_FLOOR))

    def test_amplitude_doubling_adds_log4(self):
        rng = np.random.default_rng(0)
        audio = (0.05 * rng.normal(size=16000)).astype(np.float32)
        f1, _ = mel_featurize(audio)
        f2, _ = mel_featurize(2.0 * audio)
        above = f1 > math.log(LOG_FLOOR) + 1.0
        np.testing.assert_allclose(f2[above] - f1[above], math.log(4.0), atol=1e-3)

    def test_noise_beats_silence_in_every_band(self):
        rng = np.random.default_rng(1)
        noise = (0.1 * rng.normal(size=16000)).astype(np.float32)
        fn, _ = mel_featurize(noise)
        fs, _ = mel_featurize(np.zeros(16000, dtype=np.float32))
        assert np.all(fn.mean(axis=0) > fs.mean(axis=0))

    def test_empty_audio_empty_frames(self):
        frames, times = mel_featurize(np.zeros(0, dtype=np.float32))
        assert frames.shape == (0, 40) and times.shape == (0,)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        audio = rng.normal(size=12345).astype(np.float32)
        a, _ = mel_featurize(audio)
        b, _ = mel_featurize(audio.copy())
        np.testing.assert_array_equal(a, b)


def _naive_gesture_features(window):
    """Independent two-pass implementation of the 31 features."""
    window = np.asarray(window, dtype=np.float64)
    mag = [math.sqrt(x * x + y * y + z * z) for x, y, z in window]
    channels = [window[:, 0], window[:, 1], window[:, 2], np.array(mag)]
    feats = []
    for ch in channels:
        ch = list(float(v) for v in ch)
        mean = statistics.mean(ch)
        std = math.sqrt(statistics.mean([(v - mean) ** 2 for v in ch]))
        energy = statistics.mean([v * v for v in ch])
        mad = statistics.mean([abs(ch[i + 1] - ch[i]) for i in range(len(ch) - 1)])
        feats += [mean, std, min(ch), max(ch), math.sqrt(energy), mad, energy]

    def corr(a, b):
        ma, mb = statistics.mean(a), statistics.mean(b)
        cov = statistics.mean([(x - ma) * (y - mb) for x, y in zip(a, b)])
        sa = math.sqrt(statistics.mean([(x - ma) ** 2 for x in a]))
        sb = math.sqrt(statistics.mean([(y - mb) ** 2 for y in b]))
        if sa * sb == 0:
            return 0.0
        return cov / (sa * sb)

    x, y, z = window[:, 0], window[:, 1], window[:, 2]
    feats += [corr(x, y), corr(x, z), corr(y, z)]
    return np.array(feats)


class TestGestureFeatures:
    def test_constant_window(self):
        window = np.tile(np.array([0.0, 0.0, 1.0], dtype=np.float32), (100, 1))
        f = gesture_featurize(window)
        # per-channel blocks: x, y, z, mag; stats: mean std min max rms mad energy
        x, y, z, mag = f[0:7], f[7:14], f[14:21], f[21:28]
        np.testing.assert_allclose(x, [0, 0, 0, 0, 0, 0, 0], atol=1e-7)
        np.testing.assert_allclose(y, [0, 0, 0, 0, 0, 0, 0], atol=1e-7)
        np.testing.assert_allclose(z, [1, 0, 1, 1, 1, 0, 1], atol=1e-6)
        np.testing.assert_allclose(mag, [1, 0, 1, 1, 1, 0, 1], atol=1e-6)
        np.testing.assert_allclose(f[28:], [0, 0, 0])  # degenerate correlations

    def test_identical_axes_correlate_fully(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=100).astype(np.float32)
        window = np.stack([x, x, rng.normal(size=100).astype(np.float32)], axis=1)
        f = gesture_featurize(window)
        assert abs(f[28] - 1.0) < 1e-6  # corr(x, y)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            window = rng.normal(scale=0.5, size=(100, 3)).astype(np.float32)
            np.testing.assert_allclose(
                gesture_featurize(window), _naive_gesture_features(window), atol=1e-6
            )

    def test_correlations_bounded(self):
        rng = np.random.default_rng(5)
        window = rng.normal(size=(100, 3)).astype(np.float32)
        f = gesture_featurize(window)
        assert np.all(f[28:] >= -1.0) and np.all(f[28:] <= 1.0)

    def test_wrong_shape_raises(self):
        with pytest.raises(InvalidInputError):
            gesture_featurize(np.zeros((50, 3), dtype=np.float32))


class TestAlignment:
    def test_five_second_session_is_50_ticks(self):
        rng = np.random.default_rng(6)
        audio = (0.01 * rng.normal(size=5 * 16000)).astype(np.float32)
        accel = rng.normal(size=(5 * 100, 3)).astype(np.float32)
        tl = streaming_featurize(audio, accel)
        assert tl.n_ticks == 50
        assert tl.speech.shape == (50, 400) and tl.gesture.shape == (50, 31)

    def test_shorter_accel_padded_with_tail_frames(self):
        rng = np.random.default_rng(7)
        audio = (0.01 * rng.normal(size=5 * 16000)).astype(np.float32)
        accel = rng.normal(size=(450, 3)).astype(np.float32)  # 4.5 s -> 45 ticks
        tl = streaming_featurize(audio, accel)
        assert tl.n_ticks == 50
        for t in range(45, 50):
            np.testing.assert_array_equal(tl.gesture[t], tl.gesture[44])

    def test_single_tick_session(self):
        audio = np.zeros(1600, dtype=np.float32)
        accel = np.zeros((10, 3), dtype=np.float32)
        assert streaming_featurize(audio, accel).n_ticks == 1

    def test_both_empty_raises(self):
        with pytest.raises(InvalidInputError):
            streaming_featurize(np.zeros(0, np.float32), np.zeros((0, 3), np.float32))

    def test_streaming_equals_batch_for_any_chunking(self):
        rng = np.random.default_rng(8)
        n_sec = 3
        audio = (0.02 * rng.normal(size=n_sec * 16000 + 700)).astype(np.float32)
        accel = rng.normal(size=(n_sec * 100 + 7, 3)).astype(np.float32)
        batch = streaming_featurize(audio, accel)

        for chunk_seed in range(3):
            crng = np.random.default_rng(100 + chunk_seed)
            sf = StreamingFeaturizer()
            outs = []
            ai = gi = 0
            while ai < len(audio) or gi < len(accel):
                ai_next = min(len(audio), ai + int(crng.integers(1, 5000)))
                gi_next = min(len(accel), gi + int(crng.integers(1, 40)))
                sf.feed_audio(audio[ai:ai_next])
                sf.feed_accel(accel[gi:gi_next])
                ai, gi = ai_next, gi_next
                outs.append(sf.poll())
            outs.append(sf.finalize())
            speech = np.concatenate([o.speech for o in outs])
            gesture = np.concatenate([o.gesture for o in outs])
            np.testing.assert_array_equal(speech, batch.speech)
            np.testing.assert_array_equal(gesture, batch.gesture)

    def test_gesture_tick_windows_use_edge_padding(self):
        # first tick's window is 90 copies of the first sample + 10 real ones
        accel = np.arange(30, dtype=np.float32).reshape(10, 3)
        frames = gesture_tick_frames(accel, 1)
        window = np.concatenate([np.repeat(accel[:1], 90, axis=0), accel])
        np.testing.assert_allclose(frames[0], gesture_featurize(window), atol=1e-6)
