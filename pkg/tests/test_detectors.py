"""Detector tests: architecture, streaming/batch equivalence, persistence."""

import numpy as np
import pytest

from rtsfuse.detectors import (
    Detector,
    DetectorConfig,
    DetectorState,
    detector_forward_session,
    predict_frame_labels,
    session_windows,
)
from rtsfuse.errors import InvalidInputError
from rtsfuse.nn import softmax


def _random_features(n_ticks, dim, seed=0):
    return np.random.default_rng(seed).normal(size=(n_ticks, dim)).astype(np.float32)


class TestConfig:
    def test_modality_shapes(self):
        speech = DetectorConfig("speech")
        gesture = DetectorConfig("gesture")
        assert (speech.window_ticks, speech.input_dim, speech.n_classes) == (10, 400, 2)
        assert (gesture.window_ticks, gesture.input_dim, gesture.n_classes) == (20, 31, 4)

    def test_bad_layer_count_rejected(self):
        with pytest.raises(InvalidInputError):
            DetectorConfig("speech", n_conv_layers=2)

    def test_bad_modality_rejected(self):
        with pytest.raises(InvalidInputError):
            DetectorConfig("video")


class TestForward:
    def test_zero_weights_give_zero_logits_uniform_softmax(self):
        det = Detector(DetectorConfig("gesture"))  # no rng -> all-zero weights
        logits = det.forward(np.ones((3, 20, 31), dtype=np.float32))
        np.testing.assert_array_equal(logits, np.zeros((3, 4)))
        np.testing.assert_allclose(softmax(logits, axis=-1), 0.25)

    def test_seeded_determinism(self):
        x = _random_features(1, 400, seed=3).reshape(1, 1, 400)
        window = np.repeat(x, 10, axis=1)
        a = Detector(DetectorConfig("speech"), rng=np.random.default_rng(5)).forward(window)
        b = Detector(DetectorConfig("speech"), rng=np.random.default_rng(5)).forward(window)
        np.testing.assert_array_equal(a, b)

    def test_wrong_window_dims_rejected(self):
        det = Detector(DetectorConfig("speech"), rng=np.random.default_rng(0))
        with pytest.raises(InvalidInputError):
            det.forward(np.zeros((2, 20, 31), dtype=np.float32))

    def test_parameter_count_formula(self):
        for n in (1, 3, 5):
            cfg = DetectorConfig("gesture", n_conv_layers=n)
            det = Detector(cfg, rng=np.random.default_rng(0))
            conv = 16 * 5 * 31 + 16 + (n - 1) * (16 * 5 * 16 + 16)
            dense = (20 * 16 * 128 + 128) + (128 * 32 + 32) + (32 * 4 + 4)
            assert det.param_count == conv + dense


class TestStreaming:
    @pytest.mark.parametrize("modality,n_layers", [("speech", 1), ("gesture", 1), ("gesture", 3)])
    def test_streaming_equals_batch(self, modality, n_layers):
        cfg = DetectorConfig(modality, n_conv_layers=n_layers)
        det = Detector(cfg, rng=np.random.default_rng(8))
        feats = _random_features(50, cfg.input_dim, seed=9)
        batch = detector_forward_session(det, feats)
        state = DetectorState(det)
        stream = np.stack([state.step(f) for f in feats])
        assert stream.shape == batch.shape == (50, cfg.n_classes)
        np.testing.assert_allclose(stream, batch, atol=1e-6)

    def test_first_tick_defined_with_zero_padding(self):
        cfg = DetectorConfig("gesture")
        det = Detector(cfg, rng=np.random.default_rng(1))
        state = DetectorState(det)
        frame = _random_features(1, 31, seed=2)[0]
        logits = state.step(frame)
        window = np.zeros((20, 31), dtype=np.float32)
        window[-1] = frame
        np.testing.assert_allclose(logits, det.forward(window), atol=1e-7)

    def test_out_of_order_timestamp_rejected(self):
        det = Detector(DetectorConfig("gesture"), rng=np.random.default_rng(1))
        state = DetectorState(det)
        frame = np.zeros(31, dtype=np.float32)
        state.step(frame, timestamp=0.1)
        with pytest.raises(InvalidInputError, match="out-of-order"):
            state.step(frame, timestamp=0.1)

    def test_reset_isolates_sessions(self):
        det = Detector(DetectorConfig("gesture"), rng=np.random.default_rng(4))
        state = DetectorState(det)
        a = _random_features(30, 31, seed=5)
        b = _random_features(30, 31, seed=6)
        for f in a:
            state.step(f)
        state.reset()
        after_reset = np.stack([state.step(f) for f in b])
        fresh_state = DetectorState(det)
        fresh = np.stack([fresh_state.step(f) for f in b])
        np.testing.assert_array_equal(after_reset, fresh)

    def test_session_windows_warmup_padding(self):
        feats = _random_features(5, 31, seed=7)
        windows = session_windows(feats, 20)
        assert windows.shape == (5, 20, 31)
        np.testing.assert_array_equal(windows[0, :19], np.zeros((19, 31)))
        np.testing.assert_array_equal(windows[0, 19], feats[0])
        np.testing.assert_array_equal(windows[4, 15:], feats[:5][-5:])


class TestPrediction:
    def test_tie_breaks_to_lower_class(self):
        det = Detector(DetectorConfig("gesture"))  # zero weights, all logits equal
        labels = predict_frame_labels(det, _random_features(7, 31, seed=1))
        np.testing.assert_array_equal(labels, np.zeros(7, dtype=np.int64))


class TestPersistence:
    def test_checkpoint_roundtrip_same_outputs(self, tmp_path):
        cfg = DetectorConfig("speech", n_conv_layers=3)
        det = Detector(cfg, rng=np.random.default_rng(11))
        path = tmp_path / "speech.rtsf"
        det.save(path)
        back = Detector.load(path)
        # loading pins the resolved normalization constants explicitly
        assert (back.config.modality, back.config.n_conv_layers) == ("speech", 3)
        assert back.config.norm_offset == cfg.norm_offset
        assert back.config.norm_scale == cfg.norm_scale
        feats = _random_features(12, 400, seed=12)
        np.testing.assert_array_equal(
            detector_forward_session(det, feats), detector_forward_session(back, feats)
        )
