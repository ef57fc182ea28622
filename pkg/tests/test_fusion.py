"""Fusion tests: merge semantics, neural policy, FSM traces, trigger rules."""

import dataclasses

import numpy as np
import pytest

from rtsfuse.errors import InvalidInputError
from rtsfuse.fusion import (
    FsmConfig,
    FsmPolicy,
    NeuralPolicy,
    align_and_merge,
    decide_triggers,
    moving_average,
)


class TestAlignAndMerge:
    def test_concatenation_order_gesture_then_speech(self):
        g = np.log(np.array([[0.7, 0.1, 0.1, 0.1]], dtype=np.float32))
        s = np.log(np.array([[0.9, 0.1]], dtype=np.float32))
        merged = align_and_merge(g, s, "softmax")
        np.testing.assert_allclose(merged[0], [0.7, 0.1, 0.1, 0.1, 0.9, 0.1], atol=1e-6)

    def test_softmax_blocks_sum_to_one(self):
        rng = np.random.default_rng(0)
        merged = align_and_merge(
            rng.normal(size=(40, 4)), rng.normal(size=(40, 2)), "softmax"
        )
        np.testing.assert_allclose(merged[:, :4].sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(merged[:, 4:].sum(axis=1), 1.0, atol=1e-6)

    def test_logit_variant_passes_values_through(self):
        rng = np.random.default_rng(1)
        g = rng.normal(scale=10, size=(5, 4)).astype(np.float32)
        s = rng.normal(scale=10, size=(5, 2)).astype(np.float32)
        merged = align_and_merge(g, s, "logit")
        np.testing.assert_array_equal(merged[:, :4], g)
        np.testing.assert_array_equal(merged[:, 4:], s)

    def test_unequal_lengths_rejected(self):
        with pytest.raises(InvalidInputError, match="grids disagree"):
            align_and_merge(np.zeros((5, 4)), np.zeros((4, 2)), "logit")


class TestNeuralPolicy:
    def test_zero_weight_policy_outputs_half(self):
        policy = NeuralPolicy("softmax", 32)  # no rng -> zero weights
        h = policy.initial_state()
        for _ in range(10):
            p, h = policy.step(np.random.default_rng(0).uniform(size=6), h)
            assert p == pytest.approx(0.5)

    def test_streaming_equals_batch(self):
        policy = NeuralPolicy("logit", 32, rng=np.random.default_rng(3))
        xs = np.random.default_rng(4).normal(size=(60, 6)).astype(np.float32)
        batch = policy.score_sequence(xs)
        h = policy.initial_state()
        stream = []
        for x in xs:
            p, h = policy.step(x, h)
            stream.append(p)
        np.testing.assert_allclose(stream, batch, atol=1e-6)

    def test_hidden_state_carries_information(self):
        policy = NeuralPolicy("softmax", 32, rng=np.random.default_rng(5))
        probe = np.full(6, 0.5, dtype=np.float32)
        warm = np.tile(np.array([0, 0, 0, 1, 0, 1], dtype=np.float32), (30, 1))
        h_fresh = policy.initial_state()
        p_fresh, _ = policy.step(probe, h_fresh)
        h = policy.initial_state()
        for x in warm:
            _, h = policy.step(x, h)
        p_warm, _ = policy.step(probe, h)
        assert p_fresh != pytest.approx(p_warm, abs=1e-9)

    def test_parameter_counts_match_architecture(self):
        assert NeuralPolicy("softmax", 32).param_count == 3906
        assert NeuralPolicy("logit", 64).param_count == 13954
        # both fusion variants share the 6-dim input, hence the same count
        assert NeuralPolicy("softmax", 64).param_count == NeuralPolicy("logit", 64).param_count

    def test_non_finite_input_rejected(self):
        policy = NeuralPolicy("softmax", 32, rng=np.random.default_rng(1))
        with pytest.raises(InvalidInputError):
            policy.step(np.array([np.nan, 0, 0, 0, 0, 0]), policy.initial_state())

    def test_save_load_roundtrip(self, tmp_path):
        policy = NeuralPolicy("logit", 64, rng=np.random.default_rng(6), threshold=0.37)
        path = tmp_path / "p.rtsf"
        policy.save(path)
        back = NeuralPolicy.load(path)
        assert back.fusion_type == "logit" and back.hidden_dim == 64
        assert back.threshold == pytest.approx(0.37)
        xs = np.random.default_rng(7).normal(size=(20, 6)).astype(np.float32)
        np.testing.assert_array_equal(policy.score_sequence(xs), back.score_sequence(xs))


class TestMovingAverage:
    def test_matches_naive(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(25, 3))
        for w in (1, 2, 4, 7):
            got = moving_average(x, w)
            want = np.stack(
                [x[max(0, t - w + 1) : t + 1].mean(axis=0) for t in range(len(x))]
            )
            np.testing.assert_allclose(got, want, atol=1e-12)


def _fsm_probs(n, raising=(), raised=(), dropping=(), dropped=(), speech=()):
    """Build (gesture_probs, speech_probs) with 1.0 in the given tick ranges."""
    g = np.zeros((n, 4))
    s = np.zeros(n)
    for col, ranges in enumerate((raising, raised, dropping, dropped)):
        for lo, hi in ranges:
            g[lo:hi, col] = 1.0
    for lo, hi in speech:
        s[lo:hi] = 1.0
    return g, s


def _plain_config(**overrides):
    # no smoothing, minimal hysteresis: makes hand simulation exact
    base = dict(s_gesture=1, s_speech=1, hysteresis=0.05,
                d_raising=2, d_raised=2, d_speech=3,
                t_wait=20, t_onset=30, t_cool=30)
    base.update(overrides)
    return FsmConfig(**base)


class TestFsm:
    def test_config_has_exactly_15_hyperparameters(self):
        assert len(dataclasses.fields(FsmConfig)) == 15

    def test_config_roundtrip(self, tmp_path):
        cfg = _plain_config(theta_speech=0.37)
        cfg.save(tmp_path / "fsm.txt")
        assert FsmConfig.load(tmp_path / "fsm.txt") == cfg

    def test_threshold_validation(self):
        with pytest.raises(InvalidInputError):
            FsmConfig(theta_raising=1.5)
        with pytest.raises(InvalidInputError):
            FsmConfig(d_speech=0)

    def test_constant_dropped_never_triggers(self):
        g, s = _fsm_probs(100, dropped=[(0, 100)], speech=[(0, 100)])
        events = FsmPolicy(_plain_config()).run(g, s)
        assert events == []

    def test_ideal_trace_triggers_once_at_expected_tick(self):
        # raising ticks 0-5, raised from 5, speech from tick 10
        g, s = _fsm_probs(80, raising=[(0, 5)], raised=[(5, 80)], speech=[(10, 80)])
        events = FsmPolicy(_plain_config()).run(g, s)
        assert len(events) == 1
        # IDLE counts raising at ticks 0,1 -> RAISING; raised counted at
        # ticks 5,6 -> LISTENING; speech counted at ticks 10,11,12 -> event
        assert events[0].onset_tick == 12

    def test_speech_after_onset_window_expires_no_trigger(self):
        cfg = _plain_config(t_onset=5)
        g, s = _fsm_probs(80, raising=[(0, 5)], raised=[(5, 80)], speech=[(40, 80)])
        events = FsmPolicy(cfg).run(g, s)
        assert events == []

    def test_raise_timeout_returns_to_idle(self):
        cfg = _plain_config(t_wait=4)
        # raising evidence but "raised" never confirmed
        g, s = _fsm_probs(60, raising=[(0, 60)], speech=[(10, 60)])
        assert FsmPolicy(cfg).run(g, s) == []

    def test_drop_aborts_listening(self):
        cfg = _plain_config(theta_abort=0.9)
        g, s = _fsm_probs(80, raising=[(0, 5)], raised=[(5, 9)],
                          dropping=[(9, 80)], speech=[(12, 80)])
        assert FsmPolicy(cfg).run(g, s) == []

    def test_rearm_requires_arm_down(self):
        cfg = _plain_config(t_cool=5)
        # a full cycle, then the arm drops, then a second cycle
        g, s = _fsm_probs(
            120,
            raising=[(0, 5), (60, 65)],
            raised=[(5, 40), (65, 100)],
            dropped=[(45, 60), (105, 120)],
            speech=[(10, 35), (70, 95)],
        )
        events = FsmPolicy(cfg).run(g, s)
        assert len(events) == 2
        # while the arm never drops, the cooldown gate holds
        g2, s2 = _fsm_probs(120, raising=[(0, 5)], raised=[(5, 120)], speech=[(10, 120)])
        assert len(FsmPolicy(cfg).run(g2, s2)) == 1

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        g = rng.uniform(size=(200, 4))
        s = rng.uniform(size=200)
        policy = FsmPolicy(_plain_config())
        a = policy.run(g, s)
        b = policy.run(g, s)
        assert a == b


class TestDecideTriggers:
    def test_constant_zero_no_events(self):
        assert decide_triggers(np.zeros(50), 0.5) == []

    def test_step_trace_single_event_at_rising_edge(self):
        p = np.concatenate([np.zeros(10), np.ones(10)])
        events = decide_triggers(p, 0.5)
        assert len(events) == 1 and events[0].onset_tick == 10

    def test_two_bursts_beyond_cooldown_two_events(self):
        p = np.zeros(100)
        p[10:15] = 1.0
        p[60:65] = 1.0
        events = decide_triggers(p, 0.5, cooldown=30)
        assert [e.onset_tick for e in events] == [10, 60]

    def test_burst_within_cooldown_suppressed(self):
        p = np.zeros(100)
        p[10:12] = 1.0
        p[20:22] = 1.0
        events = decide_triggers(p, 0.5, cooldown=30)
        assert [e.onset_tick for e in events] == [10]

    def test_initial_tick_counts_as_rising_edge(self):
        events = decide_triggers(np.ones(5), 0.5)
        assert [e.onset_tick for e in events] == [0]

    def test_threshold_bounds_validated(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(InvalidInputError):
                decide_triggers(np.zeros(5), bad)

    def test_peak_score_is_window_max(self):
        p = np.zeros(50)
        p[10] = 0.6
        p[12] = 0.9
        events = decide_triggers(p, 0.5, cooldown=30)
        assert events[0].peak_score == pytest.approx(0.9)

    def test_threshold_monotonicity_on_burst_traces(self):
        # for unimodal burst-shaped traces, raising the threshold never
        # creates events (oscillating traces can violate this, which is why
        # the property is checked on realistic shapes)
        rng = np.random.default_rng(9)
        for _ in range(20):
            p = np.zeros(300)
            c = 10
            while c < 280:
                w = int(rng.integers(3, 12))
                amp = rng.uniform(0.3, 1.0)
                hi = min(300, c + w)
                p[c:hi] = amp * np.hanning(hi - c)
                c += int(rng.integers(35, 60))  # bursts separated by zeros
            counts = [
                len(decide_triggers(p, th, cooldown=30))
                for th in (0.1, 0.3, 0.5, 0.7, 0.9)
            ]
            assert all(a >= b for a, b in zip(counts, counts[1:]))
