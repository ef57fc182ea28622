"""Deterministic synthetic corpus of labeled raise-to-speak sessions.

Each session is generated from an explicit script (phase timeline plus
audio events), so every label is analytic rather than annotated:

* Accelerometer: the gravity vector is slerped between a per-subject
  arm-down pose and a raised pose along a minimum-jerk trajectory whose
  speed scales with the subject's raise-speed multiplier, then summed with
  activity noise (band-limited, plus a periodic component for walking,
  running, cycling, driving, gesturing) and a small sensor noise floor.
* Audio: an environment noise bed (filtered noise at an
  environment-specific level) plus scripted events.  Speech is synthesized
  as three per-subject formant-band noises under a syllabic amplitude
  envelope; coughs are short broadband bursts with no syllabic structure
  (and are not labeled speech).
* Labels: gesture state comes from the phase timeline (so the cyclic
  grammar holds by construction), speech from the synthesis gate, intent
  from the scenario.  In positive sessions the trigger onset is the first
  tick with gesture "raised" and active speech.

Negative sessions may carry one of five challenge tags that mimic
plausible false-trigger situations: checking the time while talking,
checking and silently reading, raising and coughing, holding the phone in
the watch hand during a call, and a steering turn with loud speech (the
partial steering rotation is not an RTS raise, so its gesture labels stay
"dropped").

Generation is a pure function of (config, seed): identical inputs yield
byte-identical session files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal

from .errors import InvalidInputError
from .features import ACCEL_RATE, AUDIO_RATE, TICK_RATE
from .sessions import (
    CHALLENGE_TAGS,
    G_DROPPED,
    G_DROPPING,
    G_RAISED,
    G_RAISING,
    ManifestRecord,
    Scenario,
    Session,
    write_manifest,
    write_session,
)

__all__ = [
    "SubjectProfile",
    "GeneratorConfig",
    "sample_profile",
    "generate_session",
    "generate_corpus",
    "generate_challenge_set",
]


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    raise_speed: float  # multiplier on raise/drop speed
    orientation_bias: tuple  # three small rotation angles, radians
    loudness: float
    noise_affinity: float  # scales how noisy this subject's environments are
    wrist: str  # "left" | "right"
    formants: tuple  # three formant center frequencies, Hz
    syllable_rate: float  # Hz


def sample_profile(subject_id, rng):
    return SubjectProfile(
        subject_id=subject_id,
        raise_speed=float(rng.uniform(0.7, 1.4)),
        orientation_bias=tuple(rng.normal(0.0, 0.10, size=3).round(6)),
        loudness=float(rng.uniform(0.8, 1.25)),
        noise_affinity=float(rng.uniform(0.8, 1.25)),
        wrist="left" if rng.random() < 0.5 else "right",
        formants=(
            float(rng.uniform(420, 650)),
            float(rng.uniform(1300, 1800)),
            float(rng.uniform(2300, 2900)),
        ),
        syllable_rate=float(rng.uniform(3.0, 5.0)),
    )


@dataclass
class GeneratorConfig:
    """Corpus-level knobs; difficulty scales are deliberately exposed."""

    n_subjects: int = 50
    sessions_per_subject: int = 40
    seed: int = 0
    split: tuple = (0.70, 0.15, 0.15)
    positive_fraction: float = 0.5
    challenge_fraction: float = 0.40  # fraction of negatives carrying a tag
    duration_range: tuple = (8.0, 20.0)
    audio_noise_scale: float = 1.0
    motion_noise_scale: float = 1.0
    activity_weights: dict = field(default_factory=lambda: dict(_ACTIVITY_WEIGHTS))
    environment_weights: dict = field(default_factory=lambda: dict(_ENVIRONMENT_WEIGHTS))

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


_ACTIVITY_WEIGHTS = {
    "sitting": 0.25, "standing": 0.15, "walking": 0.20, "running": 0.05,
    "cycling": 0.05, "driving": 0.10, "gesturing": 0.10, "lying": 0.10,
}
_ENVIRONMENT_WEIGHTS = {
    "quiet": 0.30, "meeting": 0.20, "gym": 0.15, "park": 0.20, "crowd": 0.15,
}

# (broadband sigma in g, periodic frequency Hz or None, periodic amplitude)
_ACTIVITY_MOTION = {
    "sitting": (0.012, None, 0.0),
    "standing": (0.018, None, 0.0),
    "lying": (0.008, None, 0.0),
    "walking": (0.050, 2.0, 0.12),
    "running": (0.100, 2.8, 0.30),
    "cycling": (0.050, 1.4, 0.07),
    "driving": (0.035, 0.3, 0.05),
    "gesturing": (0.090, 0.7, 0.15),
}

# (bed amplitude, lowpass cutoff Hz)
_ENVIRONMENT_BED = {
    "quiet": (0.002, 1000.0),
    "meeting": (0.006, 2000.0),
    "park": (0.010, 800.0),
    "gym": (0.020, 4000.0),
    "crowd": (0.030, 3500.0),
}

_BASE_DOWN = np.array([0.20, -0.30, -0.93])
_BASE_UP = np.array([-0.75, 0.35, 0.56])
_PHONE_POSE = np.array([-0.55, 0.62, 0.30])

CLOSE_TALK_LEVEL = 0.30
FAR_TALK_LEVEL = 0.08
LOUD_TALK_LEVEL = 0.20
COUGH_LEVEL = 0.25


@lru_cache(maxsize=32)
def _butter(kind, lo, hi=None, fs=AUDIO_RATE):
    if kind == "low":
        return sp_signal.butter(4, lo, btype="low", fs=fs)
    return sp_signal.butter(2, [lo, hi], btype="band", fs=fs)


def _rotation(angles):
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _subject_poses(profile):
    rot = _rotation(profile.orientation_bias)
    flip = np.diag([-1.0, 1.0, 1.0]) if profile.wrist == "left" else np.eye(3)
    down = flip @ rot @ _BASE_DOWN
    up = flip @ rot @ _BASE_UP
    phone = flip @ rot @ _PHONE_POSE
    norm = np.linalg.norm
    return down / norm(down), up / norm(up), phone / norm(phone)


def _min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 10 * tau**3 - 15 * tau**4 + 6 * tau**5


def _slerp(a, b, t):
    """Spherical interpolation between unit vectors for t in [0,1] array."""
    cos_omega = float(np.clip(np.dot(a, b), -1.0, 1.0))
    omega = np.arccos(cos_omega)
    if omega < 1e-6:
        return np.outer(1 - t, a) + np.outer(t, b)
    so = np.sin(omega)
    return (
        np.outer(np.sin((1 - t) * omega) / so, a)
        + np.outer(np.sin(t * omega) / so, b)
    )


@dataclass
class _Script:
    """Generative plan: phase timeline plus audio events."""

    duration: float
    # (start, end, gesture_class) intervals covering [0, duration)
    phases: list
    # (start, end, kind, level); kind in {"speech", "cough"}
    audio_events: list
    # arm trajectory: (raise_start, raise_end, drop_start, drop_end, target)
    arm: tuple | None
    steering: tuple | None = None  # (start, end) partial rotation


def _plan_raise(rng, duration, profile, target="up"):
    raise_start = float(rng.uniform(1.0, 2.0))
    raise_dur = float(np.clip(0.6 / profile.raise_speed, 0.3, 1.2))
    drop_dur = float(np.clip(0.5 / profile.raise_speed, 0.25, 1.0))
    tail = 0.5
    max_hold = duration - raise_start - raise_dur - drop_dur - tail
    return raise_start, raise_dur, drop_dur, max_hold


def _phases_for_arm(duration, raise_start, raise_dur, hold_dur, drop_dur):
    raise_end = raise_start + raise_dur
    drop_start = raise_end + hold_dur
    drop_end = drop_start + drop_dur
    return [
        (0.0, raise_start, G_DROPPED),
        (raise_start, raise_end, G_RAISING),
        (raise_end, drop_start, G_RAISED),
        (drop_start, drop_end, G_DROPPING),
        (drop_end, duration, G_DROPPED),
    ], (raise_start, raise_end, drop_start, drop_end)


def _build_script(rng, profile, scenario, duration):
    """Lay out phases and audio events for one session."""
    challenge = scenario.challenge
    if scenario.intent == 1 or challenge in (
        "check-time-talking", "check-and-read", "raise-and-cough", "phone-same-hand",
    ):
        raise_start, raise_dur, drop_dur, max_hold = _plan_raise(rng, duration, profile)
        events = []
        if scenario.intent == 1:
            delay = float(rng.uniform(0.2, 0.6))
            speech_dur = float(
                np.clip(rng.uniform(1.5, 3.5), 1.0, max_hold - delay - 0.4)
            )
            hold_dur = delay + speech_dur + float(rng.uniform(0.3, 0.8))
            hold_dur = min(hold_dur, max_hold)
            start = raise_start + raise_dur + delay
            events.append((start, start + speech_dur, "speech", CLOSE_TALK_LEVEL * profile.loudness))
        elif challenge == "check-time-talking":
            hold_dur = float(rng.uniform(1.5, min(3.5, max_hold)))
            # conversation running before, through, and past the raise
            events.append((0.3, duration - 0.5, "speech", FAR_TALK_LEVEL * profile.loudness))
        elif challenge == "check-and-read":
            hold_dur = float(rng.uniform(1.5, min(4.0, max_hold)))
        elif challenge == "raise-and-cough":
            hold_dur = float(rng.uniform(1.5, min(3.5, max_hold)))
            cough_start = raise_start + raise_dur + float(rng.uniform(0.2, 0.6))
            events.append((cough_start, cough_start + 0.35, "cough", COUGH_LEVEL))
            if rng.random() < 0.5:
                events.append((cough_start + 0.5, cough_start + 0.85, "cough", COUGH_LEVEL * 0.8))
        else:  # phone-same-hand: answer a call, speech begins after the raise
            delay = float(rng.uniform(0.3, 0.8))
            speech_dur = float(np.clip(rng.uniform(1.5, 3.0), 1.0, max_hold - delay - 0.4))
            hold_dur = min(delay + speech_dur + 0.4, max_hold)
            start = raise_start + raise_dur + delay
            events.append((start, start + speech_dur, "speech", FAR_TALK_LEVEL * 1.4 * profile.loudness))
        phases, arm = _phases_for_arm(duration, raise_start, raise_dur, hold_dur, drop_dur)
        target = "phone" if challenge == "phone-same-hand" else "up"
        return _Script(duration, phases, events, arm + (target,))

    # no-raise sessions: plain negatives and the steering challenge
    phases = [(0.0, duration, G_DROPPED)]
    events = []
    steering = None
    if challenge == "steering-turn-speak":
        turn_start = float(rng.uniform(2.0, min(4.0, duration - 4.0)))
        steering = (turn_start, turn_start + float(rng.uniform(1.2, 2.0)))
        s_start = max(0.3, turn_start - float(rng.uniform(0.0, 1.0)))
        events.append((s_start, s_start + float(rng.uniform(2.0, 4.0)), "speech", LOUD_TALK_LEVEL * profile.loudness))
    else:
        # some plain negatives carry ambient conversation
        if rng.random() < 0.5:
            s_start = float(rng.uniform(0.5, duration - 3.0))
            s_dur = float(rng.uniform(1.5, min(5.0, duration - s_start - 0.5)))
            events.append((s_start, s_start + s_dur, "speech", FAR_TALK_LEVEL * profile.loudness))
    return _Script(duration, phases, events, None, steering=steering)


def _arm_trajectory(script, profile, n_accel):
    """Per-sample raise progress in [0, 1] and the target pose vector."""
    t = np.arange(n_accel) / ACCEL_RATE
    phi = np.zeros(n_accel)
    down, up, phone = _subject_poses(profile)
    target = up
    if script.arm is not None:
        raise_start, raise_end, drop_start, drop_end, pose = script.arm
        target = phone if pose == "phone" else up
        rising = (t >= raise_start) & (t < raise_end)
        phi[rising] = _min_jerk((t[rising] - raise_start) / (raise_end - raise_start))
        phi[(t >= raise_end) & (t < drop_start)] = 1.0
        dropping = (t >= drop_start) & (t < drop_end)
        phi[dropping] = 1.0 - _min_jerk((t[dropping] - drop_start) / (drop_end - drop_start))
    elif script.steering is not None:
        s0, s1 = script.steering
        inside = (t >= s0) & (t < s1)
        tau = (t[inside] - s0) / (s1 - s0)
        # partial rotation out and back; never reaches the raised pose
        phi[inside] = 0.45 * np.sin(np.pi * tau) ** 2
    return phi, down, target


def _synth_accel(rng, script, profile, scenario, n_accel, motion_scale):
    phi, down, target = _arm_trajectory(script, profile, n_accel)
    accel = _slerp(down, target, phi)

    sigma, freq, amp = _ACTIVITY_MOTION[scenario.activity]
    t = np.arange(n_accel) / ACCEL_RATE
    noise = rng.normal(size=(n_accel, 3)) * sigma * motion_scale
    b, a = _butter("low", 8.0, fs=ACCEL_RATE)
    noise = sp_signal.lfilter(b, a, noise, axis=0)
    if freq is not None:
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        phase = rng.uniform(0, 2 * np.pi)
        noise += np.outer(amp * np.sin(2 * np.pi * freq * t + phase), direction)
    # motion transient proportional to arm angular speed
    dphi = np.gradient(phi) * ACCEL_RATE
    swing = rng.normal(size=(n_accel, 3)) * 0.05
    accel = accel + noise + swing * np.abs(dphi)[:, None] * motion_scale
    accel += rng.normal(size=(n_accel, 3)) * 0.004  # sensor floor
    return accel.astype(np.float32)


def _speech_waveform(rng, profile, n_samples, level):
    """Formant-shaped noise under a syllabic envelope."""
    t = np.arange(n_samples) / AUDIO_RATE
    carrier = np.zeros(n_samples)
    widths = (120.0, 220.0, 300.0)
    gains = (1.0, 0.6, 0.35)
    for fc, bw, g in zip(profile.formants, widths, gains):
        b, a = _butter("band", max(50.0, fc - bw), fc + bw)
        carrier += g * sp_signal.lfilter(b, a, rng.normal(size=n_samples))
    rate = profile.syllable_rate
    env = np.abs(np.sin(np.pi * rate * t + rng.uniform(0, np.pi))) ** 0.7
    # occasional inter-word gaps
    n_gates = max(1, int(np.ceil(n_samples / (0.25 * AUDIO_RATE))))
    gate = np.repeat(rng.random(n_gates) < 0.85, int(0.25 * AUDIO_RATE))[:n_samples]
    b, a = _butter("low", 30.0)
    gate = sp_signal.lfilter(b, a, gate.astype(np.float64))
    wave = carrier * env * gate
    rms = np.sqrt(np.mean(wave**2)) + 1e-12
    return wave * (level / 3.0 / rms)


def _cough_waveform(rng, n_samples, level):
    t = np.arange(n_samples) / AUDIO_RATE
    burst = rng.normal(size=n_samples)
    env = np.exp(-t * 14.0)
    wave = burst * env
    rms = np.sqrt(np.mean(wave**2)) + 1e-12
    return wave * (level / 3.0 / rms)


def _synth_audio(rng, script, profile, scenario, n_audio, noise_scale):
    bed_amp, cutoff = _ENVIRONMENT_BED[scenario.environment]
    b, a = _butter("low", cutoff)
    bed = sp_signal.lfilter(b, a, rng.normal(size=n_audio))
    target_rms = bed_amp * profile.noise_affinity * noise_scale
    audio = bed * (target_rms / (np.sqrt(np.mean(bed**2)) + 1e-12))
    for start, end, kind, level in script.audio_events:
        i0 = max(0, int(start * AUDIO_RATE))
        i1 = min(n_audio, int(end * AUDIO_RATE))
        if i1 <= i0:
            continue
        if kind == "speech":
            audio[i0:i1] += _speech_waveform(rng, profile, i1 - i0, level)
        else:
            audio[i0:i1] += _cough_waveform(rng, i1 - i0, level)
    return np.clip(audio, -0.99, 0.99).astype(np.float32)


def _labels_from_script(script, scenario, n_ticks):
    mid = (np.arange(n_ticks) + 0.5) / TICK_RATE
    gesture = np.full(n_ticks, G_DROPPED, dtype=np.uint8)
    for start, end, cls in script.phases:
        gesture[(mid >= start) & (mid < end)] = cls
    speech = np.zeros(n_ticks, dtype=np.uint8)
    for start, end, kind, _ in script.audio_events:
        if kind == "speech":
            speech[(mid >= start) & (mid < end)] = 1
    if scenario.intent == 1:
        intent = ((gesture == G_RAISED) & (speech == 1)).astype(np.uint8)
    else:
        intent = np.zeros(n_ticks, dtype=np.uint8)
    return speech, gesture, intent


def generate_session(profile, scenario, seed, session_id=None,
                     duration_range=(8.0, 20.0), audio_noise_scale=1.0,
                     motion_noise_scale=1.0):
    """Generate one labeled session; a pure function of its arguments."""
    rng = np.random.default_rng(seed)
    n_ticks = int(rng.integers(int(duration_range[0] * 10), int(duration_range[1] * 10) + 1))
    duration = n_ticks / TICK_RATE
    script = _build_script(rng, profile, scenario, duration)
    n_audio = int(round(duration * AUDIO_RATE))
    n_accel = int(round(duration * ACCEL_RATE))
    accel = _synth_accel(rng, script, profile, scenario, n_accel, motion_noise_scale)
    audio = _synth_audio(rng, script, profile, scenario, n_audio, audio_noise_scale)
    speech, gesture, intent = _labels_from_script(script, scenario, n_ticks)

    onsets = np.zeros(0, dtype=np.float64)
    if scenario.intent == 1:
        hit = np.nonzero((gesture == G_RAISED) & (speech == 1))[0]
        if len(hit) == 0:
            raise InvalidInputError("positive script produced no raised+speech tick")
        onsets = np.array([hit[0] / TICK_RATE], dtype=np.float64)

    if session_id is None:
        session_id = f"{profile.subject_id}-{seed if np.isscalar(seed) else '-'.join(map(str, seed))}"
    return Session(
        session_id=session_id,
        subject_id=profile.subject_id,
        scenario=scenario,
        audio=audio,
        accel=accel,
        speech_labels=speech,
        gesture_labels=gesture,
        intent_labels=intent,
        trigger_onsets=onsets,
    ).validate()


def _weighted_choice(rng, weights):
    keys = sorted(weights)
    p = np.array([weights[k] for k in keys], dtype=np.float64)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def _sample_scenario(rng, config):
    activity = _weighted_choice(rng, config.activity_weights)
    environment = _weighted_choice(rng, config.environment_weights)
    if rng.random() < config.positive_fraction:
        return Scenario(activity, environment, 1)
    if rng.random() < config.challenge_fraction:
        tag = CHALLENGE_TAGS[int(rng.integers(len(CHALLENGE_TAGS)))]
        if tag == "steering-turn-speak":
            activity = "driving"
        return Scenario(activity, environment, 0, challenge=tag)
    return Scenario(activity, environment, 0)


def split_subjects(n_subjects, split, rng):
    """Assign each subject to exactly one split, honoring the ratios."""
    if abs(sum(split) - 1.0) > 1e-9:
        raise InvalidInputError(f"split fractions must sum to 1, got {split}")
    n_train = int(round(split[0] * n_subjects))
    n_val = int(round(split[1] * n_subjects))
    n_test = n_subjects - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise InvalidInputError("each split needs at least one subject")
    names = np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test)
    order = rng.permutation(n_subjects)
    return [str(names[np.nonzero(order == i)[0][0]]) for i in range(n_subjects)]


def generate_corpus(config, out_dir, progress=None, threads=1):
    """Write session files plus ``manifest.jsonl`` under ``out_dir``.

    Subjects are split 70/15/15 (by subject, never by session), roughly
    half the scenarios are positive, and a configurable share of the
    negatives carries challenge tags.  Per-session synthesis is seeded
    independently, so worker threads change nothing about the output
    bytes.  Returns the manifest records.
    """
    if config.n_subjects < 10:
        raise InvalidInputError("need at least 10 subjects for subject-level splits")
    out_dir = Path(out_dir)
    (out_dir / "sessions").mkdir(parents=True, exist_ok=True)

    split_rng = np.random.default_rng([config.seed, 1])
    splits = split_subjects(config.n_subjects, tuple(config.split), split_rng)

    tasks = []
    for si in range(config.n_subjects):
        subject_id = f"subj{si:04d}"
        subject_rng = np.random.default_rng([config.seed, 2, si])
        profile = sample_profile(subject_id, subject_rng)
        for sj in range(config.sessions_per_subject):
            scenario_rng = np.random.default_rng([config.seed, 3, si, sj])
            scenario = _sample_scenario(scenario_rng, config)
            tasks.append((si, sj, profile, scenario))

    def build(task):
        si, sj, profile, scenario = task
        session_id = f"{profile.subject_id}_s{sj:03d}"
        session = generate_session(
            profile,
            scenario,
            seed=[config.seed, 4, si, sj],
            session_id=session_id,
            duration_range=tuple(config.duration_range),
            audio_noise_scale=config.audio_noise_scale,
            motion_noise_scale=config.motion_noise_scale,
        )
        rel_path = f"sessions/{session_id}.rtss"
        write_session(out_dir / rel_path, session)
        return ManifestRecord(
            path=rel_path,
            split=splits[si],
            subject_id=profile.subject_id,
            session_id=session_id,
            activity=scenario.activity,
            environment=scenario.environment,
            intent=scenario.intent,
            challenge=scenario.challenge,
        )

    records = list(_parallel_map(build, tasks, threads, progress))
    write_manifest(out_dir / "manifest.jsonl", records)
    (out_dir / "generator_config.json").write_text(config.to_json() + "\n")
    return records


def _parallel_map(fn, items, threads, progress=None):
    """Order-stable map with an optional thread pool."""
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, out in enumerate(pool.map(fn, items)):
                if progress is not None:
                    progress(i + 1, len(items))
                yield out
    else:
        for i, item in enumerate(items):
            out = fn(item)
            if progress is not None:
                progress(i + 1, len(items))
            yield out


def generate_challenge_set(config, out_dir, n_per_scenario=40, profiles_from=None):
    """Write a dedicated challenge corpus: each of the five tags appears
    exactly ``n_per_scenario`` times, all negative-intent.

    Subjects are sampled fresh (or reuse ``profiles_from`` profiles) so the
    set stays disjoint from training identities.
    """
    out_dir = Path(out_dir)
    (out_dir / "sessions").mkdir(parents=True, exist_ok=True)
    records = []
    for tag_i, tag in enumerate(CHALLENGE_TAGS):
        for k in range(n_per_scenario):
            rng = np.random.default_rng([config.seed, 5, tag_i, k])
            if profiles_from:
                profile = profiles_from[int(rng.integers(len(profiles_from)))]
            else:
                profile = sample_profile(f"chal{tag_i}{k:04d}", rng)
            activity = "driving" if tag == "steering-turn-speak" else _weighted_choice(
                rng, config.activity_weights
            )
            environment = _weighted_choice(rng, config.environment_weights)
            scenario = Scenario(activity, environment, 0, challenge=tag)
            session_id = f"chal_{tag_i}_{k:04d}"
            session = generate_session(
                profile,
                scenario,
                seed=[config.seed, 6, tag_i, k],
                session_id=session_id,
                duration_range=tuple(config.duration_range),
                audio_noise_scale=config.audio_noise_scale,
                motion_noise_scale=config.motion_noise_scale,
            )
            rel_path = f"sessions/{session_id}.rtss"
            write_session(out_dir / rel_path, session)
            records.append(
                ManifestRecord(
                    path=rel_path,
                    split="challenge",
                    subject_id=profile.subject_id,
                    session_id=session_id,
                    activity=scenario.activity,
                    environment=scenario.environment,
                    intent=0,
                    challenge=tag,
                )
            )
    write_manifest(out_dir / "manifest.jsonl", records)
    return records
