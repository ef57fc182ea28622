"""Session container, binary session file format, and corpus manifests.

A session pairs raw 16 kHz audio with 100 Hz 3-axis accelerometer data and
carries per-tick ground truth on the 10 Hz decision grid: speech {0,1},
gesture state {0..3}, and binary intent, plus trigger-onset timestamps.

On disk a session is a small chunked container:

    magic       4 bytes   b"RTSS"
    version     u16 LE    currently 1
    header_len  u32 LE
    header      UTF-8 JSON: session/subject ids, scenario, rates, durations
    chunks, each:  tag (4 ASCII bytes) + u64 LE payload length + payload
        AUDI  float32 LE PCM samples
        ACCL  float32 LE samples, interleaved x,y,z
        LABL  3 bytes per tick: speech u8, gesture u8, intent u8
        EVNT  float64 LE trigger onsets in seconds

Corpus manifests are JSON-lines text, one record per session: relative
path, split, subject, scenario fields, and the optional challenge tag.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, MissingArtifactError
from .features import ACCEL_RATE, AUDIO_RATE, accel_tick_count, audio_tick_count

SESSION_MAGIC = b"RTSS"
SESSION_FORMAT_VERSION = 1

GESTURE_CLASSES = ("raising", "raised", "dropping", "dropped")
G_RAISING, G_RAISED, G_DROPPING, G_DROPPED = 0, 1, 2, 3

ACTIVITIES = (
    "sitting", "standing", "walking", "running",
    "cycling", "driving", "gesturing", "lying",
)
ENVIRONMENTS = ("quiet", "meeting", "gym", "park", "crowd")
CHALLENGE_TAGS = (
    "check-time-talking",
    "check-and-read",
    "raise-and-cough",
    "phone-same-hand",
    "steering-turn-speak",
)


@dataclass(frozen=True)
class Scenario:
    activity: str
    environment: str
    intent: int  # 1 = RTS interaction, 0 = negative
    challenge: str | None = None

    def __post_init__(self):
        if self.activity not in ACTIVITIES:
            raise InvalidInputError(f"unknown activity {self.activity!r}")
        if self.environment not in ENVIRONMENTS:
            raise InvalidInputError(f"unknown environment {self.environment!r}")
        if self.intent not in (0, 1):
            raise InvalidInputError("intent must be 0 or 1")
        if self.challenge is not None:
            if self.challenge not in CHALLENGE_TAGS:
                raise InvalidInputError(f"unknown challenge tag {self.challenge!r}")
            if self.intent != 0:
                raise InvalidInputError("challenge tags only apply to negative scenarios")


@dataclass
class Session:
    session_id: str
    subject_id: str
    scenario: Scenario
    audio: np.ndarray  # [n] float32 in [-1, 1]
    accel: np.ndarray  # [m, 3] float32 in g
    speech_labels: np.ndarray  # [n_ticks] uint8
    gesture_labels: np.ndarray  # [n_ticks] uint8
    intent_labels: np.ndarray  # [n_ticks] uint8
    trigger_onsets: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.float64)
    )

    @property
    def n_ticks(self):
        return len(self.speech_labels)

    @property
    def duration(self):
        return len(self.audio) / AUDIO_RATE

    def validate(self):
        """Raise InvalidInputError on any broken session invariant."""
        n = self.n_ticks
        if audio_tick_count(len(self.audio)) != n or accel_tick_count(len(self.accel)) != n:
            raise InvalidInputError(
                f"{self.session_id}: label timeline ({n} ticks) does not match "
                f"audio/accel tick counts"
            )
        if len(self.gesture_labels) != n or len(self.intent_labels) != n:
            raise InvalidInputError(f"{self.session_id}: label arrays disagree in length")
        if self.accel.ndim != 2 or self.accel.shape[1] != 3:
            raise InvalidInputError(f"{self.session_id}: accel must be [m, 3]")
        for name, arr, hi in (
            ("speech", self.speech_labels, 1),
            ("gesture", self.gesture_labels, 3),
            ("intent", self.intent_labels, 1),
        ):
            if arr.min(initial=0) < 0 or arr.max(initial=0) > hi:
                raise InvalidInputError(f"{self.session_id}: {name} labels out of range")
        check_gesture_grammar(self.gesture_labels, session_id=self.session_id)
        if self.scenario.intent == 1:
            if len(self.trigger_onsets) == 0:
                raise InvalidInputError(f"{self.session_id}: positive session with no onsets")
            for onset in self.trigger_onsets:
                tick = int(round(onset * 10))
                if not (0 <= tick < n):
                    raise InvalidInputError(f"{self.session_id}: onset {onset} out of bounds")
                if self.gesture_labels[tick] != G_RAISED or self.speech_labels[tick] != 1:
                    raise InvalidInputError(
                        f"{self.session_id}: onset tick {tick} lacks raised gesture + speech"
                    )
        else:
            if len(self.trigger_onsets) != 0:
                raise InvalidInputError(f"{self.session_id}: negative session with onsets")
            if np.any(self.intent_labels != 0):
                raise InvalidInputError(f"{self.session_id}: negative session with intent ticks")
        return self


_LEGAL_NEXT = {
    G_DROPPED: (G_DROPPED, G_RAISING),
    G_RAISING: (G_RAISING, G_RAISED),
    G_RAISED: (G_RAISED, G_DROPPING),
    G_DROPPING: (G_DROPPING, G_DROPPED),
}


def check_gesture_grammar(labels, session_id="?"):
    """Enforce the cyclic grammar dropped->raising->raised->dropping->dropped."""
    labels = np.asarray(labels)
    for t in range(1, len(labels)):
        if int(labels[t]) not in _LEGAL_NEXT[int(labels[t - 1])]:
            raise InvalidInputError(
                f"{session_id}: illegal gesture transition "
                f"{GESTURE_CLASSES[int(labels[t-1])]} -> {GESTURE_CLASSES[int(labels[t])]} "
                f"at tick {t}"
            )
    return True


def write_session(path, session):
    header = {
        "format_version": SESSION_FORMAT_VERSION,
        "session_id": session.session_id,
        "subject_id": session.subject_id,
        "scenario": asdict(session.scenario),
        "audio_rate": AUDIO_RATE,
        "accel_rate": ACCEL_RATE,
        "duration_s": len(session.audio) / AUDIO_RATE,
        "n_ticks": session.n_ticks,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    labl = np.stack(
        [
            session.speech_labels.astype(np.uint8),
            session.gesture_labels.astype(np.uint8),
            session.intent_labels.astype(np.uint8),
        ],
        axis=1,
    ).tobytes()
    chunks = [
        (b"AUDI", np.ascontiguousarray(session.audio, dtype="<f4").tobytes()),
        (b"ACCL", np.ascontiguousarray(session.accel, dtype="<f4").tobytes()),
        (b"LABL", labl),
        (b"EVNT", np.ascontiguousarray(session.trigger_onsets, dtype="<f8").tobytes()),
    ]
    parts = [
        SESSION_MAGIC,
        struct.pack("<HI", SESSION_FORMAT_VERSION, len(header_bytes)),
        header_bytes,
    ]
    for tag, payload in chunks:
        parts.append(tag)
        parts.append(struct.pack("<Q", len(payload)))
        parts.append(payload)
    Path(path).write_bytes(b"".join(parts))


def read_session(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"session file not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != SESSION_MAGIC:
        raise InvalidInputError(f"{path}: bad session magic {blob[:4]!r}")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != SESSION_FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported session format {version}")
    off = 10
    header = json.loads(blob[off : off + header_len].decode("utf-8"))
    off += header_len
    chunks = {}
    while off < len(blob):
        tag = blob[off : off + 4]
        (length,) = struct.unpack_from("<Q", blob, off + 4)
        off += 12
        chunks[tag] = blob[off : off + length]
        off += length
    audio = np.frombuffer(chunks[b"AUDI"], dtype="<f4").copy()
    accel = np.frombuffer(chunks[b"ACCL"], dtype="<f4").reshape(-1, 3).copy()
    labl = np.frombuffer(chunks[b"LABL"], dtype=np.uint8).reshape(-1, 3)
    onsets = np.frombuffer(chunks[b"EVNT"], dtype="<f8").copy()
    sc = header["scenario"]
    return Session(
        session_id=header["session_id"],
        subject_id=header["subject_id"],
        scenario=Scenario(
            activity=sc["activity"],
            environment=sc["environment"],
            intent=int(sc["intent"]),
            challenge=sc.get("challenge"),
        ),
        audio=audio,
        accel=accel,
        speech_labels=labl[:, 0].copy(),
        gesture_labels=labl[:, 1].copy(),
        intent_labels=labl[:, 2].copy(),
        trigger_onsets=onsets,
    )


@dataclass(frozen=True)
class ManifestRecord:
    path: str  # relative to the manifest's directory
    split: str  # train | val | test
    subject_id: str
    session_id: str
    activity: str
    environment: str
    intent: int
    challenge: str | None = None


def write_manifest(path, records):
    lines = [json.dumps(asdict(r), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"manifest not found: {path}")
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        records.append(ManifestRecord(**json.loads(line)))
    return records


class Corpus:
    """A manifest plus lazy access to its session files."""

    def __init__(self, root):
        self.root = Path(root)
        self.records = read_manifest(self.root / "manifest.jsonl")

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def load(self, record):
        return read_session(self.root / record.path)

    def __len__(self):
        return len(self.records)
