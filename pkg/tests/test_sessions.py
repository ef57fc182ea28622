"""Session container, file format, grammar checks, manifests."""

import numpy as np
import pytest

from rtsfuse.errors import InvalidInputError
from rtsfuse.sessions import (
    G_DROPPED,
    G_DROPPING,
    G_RAISED,
    G_RAISING,
    ManifestRecord,
    Scenario,
    Session,
    check_gesture_grammar,
    read_manifest,
    read_session,
    write_manifest,
    write_session,
)


def _toy_session(intent=1, n_ticks=30):
    rng = np.random.default_rng(0)
    gesture = np.full(n_ticks, G_DROPPED, dtype=np.uint8)
    gesture[5:8] = G_RAISING
    gesture[8:20] = G_RAISED
    gesture[20:23] = G_DROPPING
    speech = np.zeros(n_ticks, dtype=np.uint8)
    speech[10:18] = 1
    intent_labels = ((gesture == G_RAISED) & (speech == 1)).astype(np.uint8)
    if intent == 0:
        speech[:] = 0
        intent_labels[:] = 0
    return Session(
        session_id="toy",
        subject_id="subjA",
        scenario=Scenario("sitting", "quiet", intent),
        audio=rng.normal(scale=0.01, size=n_ticks * 1600).astype(np.float32),
        accel=rng.normal(scale=0.01, size=(n_ticks * 10, 3)).astype(np.float32),
        speech_labels=speech,
        gesture_labels=gesture,
        intent_labels=intent_labels,
        trigger_onsets=np.array([1.0]) if intent else np.zeros(0),
    )


class TestGrammar:
    def test_legal_cycle_passes(self):
        labels = [3, 3, 0, 0, 1, 1, 1, 2, 2, 3, 3, 0, 1, 2, 3]
        assert check_gesture_grammar(labels)

    @pytest.mark.parametrize("bad", [[3, 1], [0, 2], [1, 0], [2, 1], [3, 2], [0, 3]])
    def test_illegal_transitions_raise(self, bad):
        with pytest.raises(InvalidInputError, match="illegal gesture transition"):
            check_gesture_grammar(bad)


class TestScenario:
    def test_challenge_on_positive_rejected(self):
        with pytest.raises(InvalidInputError):
            Scenario("sitting", "quiet", 1, challenge="check-and-read")

    def test_unknown_activity_rejected(self):
        with pytest.raises(InvalidInputError):
            Scenario("flying", "quiet", 0)


class TestSessionValidation:
    def test_valid_positive_passes(self):
        _toy_session().validate()

    def test_positive_without_onset_rejected(self):
        s = _toy_session()
        s.trigger_onsets = np.zeros(0)
        with pytest.raises(InvalidInputError, match="no onsets"):
            s.validate()

    def test_onset_must_sit_on_raised_speech_tick(self):
        s = _toy_session()
        s.trigger_onsets = np.array([0.2])  # gesture still dropped there
        with pytest.raises(InvalidInputError, match="raised"):
            s.validate()

    def test_negative_with_intent_ticks_rejected(self):
        s = _toy_session(intent=0)
        s.intent_labels[4] = 1
        with pytest.raises(InvalidInputError):
            s.validate()


class TestSessionFile:
    def test_roundtrip_exact(self, tmp_path):
        s = _toy_session()
        path = tmp_path / "s.rtss"
        write_session(path, s)
        back = read_session(path)
        np.testing.assert_array_equal(back.audio, s.audio)
        np.testing.assert_array_equal(back.accel, s.accel)
        np.testing.assert_array_equal(back.speech_labels, s.speech_labels)
        np.testing.assert_array_equal(back.gesture_labels, s.gesture_labels)
        np.testing.assert_array_equal(back.intent_labels, s.intent_labels)
        np.testing.assert_array_equal(back.trigger_onsets, s.trigger_onsets)
        assert back.scenario == s.scenario
        assert back.session_id == s.session_id and back.subject_id == s.subject_id
        back.validate()

    def test_write_deterministic(self, tmp_path):
        s = _toy_session()
        write_session(tmp_path / "a.rtss", s)
        write_session(tmp_path / "b.rtss", s)
        assert (tmp_path / "a.rtss").read_bytes() == (tmp_path / "b.rtss").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.rtss"
        p.write_bytes(b"XXXX" + bytes(32))
        with pytest.raises(InvalidInputError, match="magic"):
            read_session(p)


class TestManifest:
    def test_roundtrip(self, tmp_path):
        records = [
            ManifestRecord("sessions/a.rtss", "train", "subj0", "a", "sitting", "quiet", 1, None),
            ManifestRecord("sessions/b.rtss", "val", "subj1", "b", "driving", "crowd", 0,
                           "steering-turn-speak"),
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, records)
        assert read_manifest(path) == records
