"""Raw-signal featurizers on a shared 10 Hz decision grid.

Audio (16 kHz PCM in [-1, 1]) becomes 40-dim log mel filterbank frames at
100 frames/s: 25 ms periodic Hann window, 10 ms hop, 512-point FFT, power
spectrum, triangular mel filters spanning 0-8000 Hz, natural log with a
1e-10 power floor.  Ten consecutive mel frames stack into one 400-dim tick
block per 100 ms decision tick.

Accelerometer (100 Hz, 3 axes, units of g) becomes one 31-dim statistical
frame per tick: over the 1 s window ending at the tick boundary, for each
of the four channels x, y, z and magnitude sqrt(x^2+y^2+z^2), the seven
statistics mean, standard deviation, min, max, RMS, mean absolute first
difference, and energy (mean of squares), followed by the three Pearson
correlations corr(x,y), corr(x,z), corr(y,z).  The window is edge-padded
with the first sample before the session starts; zero-variance channels
yield correlation 0.

Tick counts: ``floor(samples / rate / 0.1)`` per modality.  When the two
modalities disagree, the shorter timeline tail-pads with its last frame.
Everything here is deterministic, and the chunk-fed streaming featurizer
reproduces batch output exactly for any chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError

AUDIO_RATE = 16000
ACCEL_RATE = 100
TICK_RATE = 10
TICK_SECONDS = 1.0 / TICK_RATE

MEL_WINDOW = 400  # 25 ms at 16 kHz
MEL_HOP = 160  # 10 ms at 16 kHz
MEL_FFT = 512
N_MEL = 40
MEL_FMIN = 0.0
MEL_FMAX = 8000.0
LOG_FLOOR = 1e-10

MEL_FRAMES_PER_TICK = 10
SPEECH_TICK_DIM = N_MEL * MEL_FRAMES_PER_TICK  # 400
GESTURE_WINDOW = 100  # 1 s of accelerometer samples
GESTURE_DIM = 31

AUDIO_SAMPLES_PER_TICK = AUDIO_RATE // TICK_RATE  # 1600
ACCEL_SAMPLES_PER_TICK = ACCEL_RATE // TICK_RATE  # 10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_filterbank(n_filters=N_MEL, fft_size=MEL_FFT, sample_rate=AUDIO_RATE,
                         f_min=MEL_FMIN, f_max=MEL_FMAX):
    """Triangular mel filterbank as an [n_filters, fft_size//2+1] matrix."""
    n_bins = fft_size // 2 + 1
    mel_edges = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters + 2)
    hz_edges = mel_to_hz(mel_edges)
    bin_freqs = np.arange(n_bins) * (sample_rate / fft_size)

    fb = np.zeros((n_filters, n_bins), dtype=np.float32)
    for k in range(n_filters):
        lo, center, hi = hz_edges[k], hz_edges[k + 1], hz_edges[k + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        fb[k] = np.maximum(0.0, np.minimum(rising, falling))
        if not np.any(fb[k] > 0):
            raise InvalidInputError(
                f"fft_size {fft_size} too small: mel filter {k} covers no FFT bin"
            )
    return fb


_FB_CACHE: dict = {}


def _filterbank():
    key = (N_MEL, MEL_FFT, AUDIO_RATE)
    if key not in _FB_CACHE:
        _FB_CACHE[key] = build_mel_filterbank()
    return _FB_CACHE[key]


def _hann(n):
    # periodic Hann, the speech-processing convention
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)).astype(np.float32)


_WINDOW = _hann(MEL_WINDOW)


def mel_frame_count(n_samples):
    if n_samples < MEL_WINDOW:
        return 0
    return (n_samples - MEL_WINDOW) // MEL_HOP + 1


def mel_featurize(samples, n_frames=None, first_frame=0):
    """Log mel filterbank frames for 16 kHz PCM.

    Returns ``(frames [n, 40], times [n])`` where a frame's timestamp is
    the start of its 25 ms analysis window.  Empty or too-short audio
    yields zero frames.
    """
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 1:
        raise InvalidInputError(f"audio must be 1-D, got shape {samples.shape}")
    total = mel_frame_count(len(samples))
    if n_frames is None:
        n_frames = total - first_frame
    n_frames = max(0, min(n_frames, total - first_frame))
    if n_frames <= 0:
        return (np.zeros((0, N_MEL), dtype=np.float32),
                np.zeros(0, dtype=np.float64))
    start = first_frame * MEL_HOP
    span = samples[start : start + (n_frames - 1) * MEL_HOP + MEL_WINDOW]
    windows = sliding_window_view(span, MEL_WINDOW)[::MEL_HOP] * _WINDOW
    spectrum = np.fft.rfft(windows, n=MEL_FFT, axis=-1)
    power = (spectrum.real**2 + spectrum.imag**2).astype(np.float32)
    # einsum keeps the per-frame reduction order independent of the batch
    # size, so chunk-fed streaming output is bit-identical to batch output
    mel = np.einsum("nb,kb->nk", power, _filterbank())
    frames = np.log(np.maximum(mel, LOG_FLOOR))
    times = (first_frame + np.arange(n_frames)) * (MEL_HOP / AUDIO_RATE)
    return frames.astype(np.float32), times


def audio_tick_count(n_samples):
    return int(n_samples) // AUDIO_SAMPLES_PER_TICK


def accel_tick_count(n_samples):
    return int(n_samples) // ACCEL_SAMPLES_PER_TICK


def speech_tick_blocks(mel_frames, n_ticks):
    """Group mel frames into [n_ticks, 400] blocks of 10 stacked frames.

    The trailing block repeat-pads the final mel frame when the framing
    loses the last partial analysis window; with no frames at all the
    blocks are log-floor vectors.
    """
    need = n_ticks * MEL_FRAMES_PER_TICK
    n = len(mel_frames)
    if n >= need:
        grouped = mel_frames[:need]
    else:
        if n == 0:
            pad_row = np.full((1, N_MEL), np.log(LOG_FLOOR), dtype=np.float32)
        else:
            pad_row = mel_frames[-1:]
        grouped = np.concatenate(
            [mel_frames, np.repeat(pad_row, need - n, axis=0)], axis=0
        )
    return grouped.reshape(n_ticks, SPEECH_TICK_DIM)


def _channel_stats(windows):
    """Seven per-channel statistics over [n, W, C] -> [n, C, 7]."""
    mean = windows.mean(axis=1)
    std = windows.std(axis=1)
    mn = windows.min(axis=1)
    mx = windows.max(axis=1)
    sq = np.mean(np.square(windows), axis=1)
    rms = np.sqrt(sq)
    mad = np.mean(np.abs(np.diff(windows, axis=1)), axis=1)
    return np.stack([mean, std, mn, mx, rms, mad, sq], axis=-1)


def _pairwise_corr(windows):
    """corr(x,y), corr(x,z), corr(y,z) over [n, W, 3] -> [n, 3]."""
    centered = windows - windows.mean(axis=1, keepdims=True)
    std = windows.std(axis=1)
    out = np.zeros((windows.shape[0], 3), dtype=windows.dtype)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for j, (a, b) in enumerate(pairs):
        cov = np.mean(centered[:, :, a] * centered[:, :, b], axis=1)
        denom = std[:, a] * std[:, b]
        ok = denom > 0
        out[ok, j] = cov[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def gesture_featurize_windows(windows):
    """31-dim statistical features for accel windows [n, 100, 3]."""
    windows = np.asarray(windows, dtype=np.float32)
    if windows.ndim != 3 or windows.shape[1:] != (GESTURE_WINDOW, 3):
        raise InvalidInputError(
            f"expected accel windows [n, {GESTURE_WINDOW}, 3], got {windows.shape}"
        )
    mag = np.linalg.norm(windows, axis=-1, keepdims=True)
    four = np.concatenate([windows, mag], axis=-1)
    stats = _channel_stats(four).reshape(windows.shape[0], 28)
    corr = _pairwise_corr(windows)
    return np.concatenate([stats, corr], axis=-1).astype(np.float32)


def gesture_featurize(window):
    """31-dim feature vector for a single 1 s accel window [100, 3]."""
    window = np.asarray(window, dtype=np.float32)
    if window.shape != (GESTURE_WINDOW, 3):
        raise InvalidInputError(
            f"expected a [{GESTURE_WINDOW}, 3] accel window, got {window.shape}"
        )
    return gesture_featurize_windows(window[None])[0]


def gesture_tick_frames(accel, n_ticks):
    """Per-tick gesture features [n_ticks, 31] for a session's accel data.

    The window for tick t covers the second ending at sample 10*(t+1);
    history before the first sample is edge-padded.
    """
    accel = np.asarray(accel, dtype=np.float32)
    if accel.ndim != 2 or accel.shape[1] != 3:
        raise InvalidInputError(f"accel must be [n, 3], got {accel.shape}")
    if n_ticks == 0:
        return np.zeros((0, GESTURE_DIM), dtype=np.float32)
    pad = GESTURE_WINDOW - ACCEL_SAMPLES_PER_TICK  # 90 samples of history
    first = accel[:1] if len(accel) else np.zeros((1, 3), dtype=np.float32)
    padded = np.concatenate([np.repeat(first, pad, axis=0), accel], axis=0)
    windows = sliding_window_view(padded, GESTURE_WINDOW, axis=0)
    windows = windows[:: ACCEL_SAMPLES_PER_TICK][:n_ticks]
    return gesture_featurize_windows(np.moveaxis(windows, 1, 2))


@dataclass
class FeatureTimeline:
    """Aligned per-tick features for one session."""

    speech: np.ndarray  # [n_ticks, 400]
    gesture: np.ndarray  # [n_ticks, 31]
    tick_times: np.ndarray  # [n_ticks], seconds, start of each tick

    @property
    def n_ticks(self):
        return len(self.tick_times)


def _pad_tail(frames, n, dim):
    if len(frames) >= n:
        return frames[:n]
    if len(frames) == 0:
        return np.zeros((n, dim), dtype=np.float32)
    tail = np.repeat(frames[-1:], n - len(frames), axis=0)
    return np.concatenate([frames, tail], axis=0)


def streaming_featurize(audio, accel):
    """Featurize both streams onto one aligned 10 Hz timeline.

    The shorter modality tail-pads with its last frame (zeros if it is
    empty entirely); raises if both streams are empty.
    """
    audio = np.asarray(audio, dtype=np.float32)
    accel = (
        np.asarray(accel, dtype=np.float32).reshape(-1, 3)
        if np.size(accel)
        else np.zeros((0, 3), np.float32)
    )
    n_audio = audio_tick_count(len(audio))
    n_accel = accel_tick_count(len(accel))
    n = max(n_audio, n_accel)
    if n == 0:
        raise InvalidInputError("both streams are too short for a single tick")
    mel, _ = mel_featurize(audio)
    speech = (
        speech_tick_blocks(mel, n_audio)
        if n_audio
        else np.zeros((0, SPEECH_TICK_DIM), np.float32)
    )
    gesture = gesture_tick_frames(accel, n_accel)
    return FeatureTimeline(
        speech=_pad_tail(speech, n, SPEECH_TICK_DIM),
        gesture=_pad_tail(gesture, n, GESTURE_DIM),
        tick_times=np.arange(n, dtype=np.float64) * TICK_SECONDS,
    )


# tick t needs mel frame 10t+9, whose analysis window ends at sample
# 160*(10t+9) + 400 = 1600t + 1840
_TICK_AUDIO_SPAN = MEL_WINDOW + 9 * MEL_HOP


@dataclass
class StreamingFeaturizer:
    """Chunk-fed featurizer that matches batch output exactly.

    Feed arbitrary chunks, drain complete ticks with ``poll``, then call
    ``finalize`` at end of stream to flush the padded tail.  State is
    single-owner: one instance per session.
    """

    _audio: list = field(default_factory=list)
    _accel: list = field(default_factory=list)
    _mel: list = field(default_factory=list)
    _n_mel_done: int = 0
    _emitted: int = 0
    _finalized: bool = False

    def feed_audio(self, chunk):
        if self._finalized:
            raise InvalidInputError("featurizer already finalized")
        chunk = np.asarray(chunk, dtype=np.float32).reshape(-1)
        if len(chunk):
            self._audio.append(chunk)

    def feed_accel(self, chunk):
        if self._finalized:
            raise InvalidInputError("featurizer already finalized")
        chunk = np.asarray(chunk, dtype=np.float32).reshape(-1, 3)
        if len(chunk):
            self._accel.append(chunk)

    def _audio_array(self):
        return np.concatenate(self._audio) if self._audio else np.zeros(0, np.float32)

    def _accel_array(self):
        return (
            np.concatenate(self._accel)
            if self._accel
            else np.zeros((0, 3), np.float32)
        )

    def _update_mel(self, audio):
        total = mel_frame_count(len(audio))
        if total > self._n_mel_done:
            frames, _ = mel_featurize(
                audio, n_frames=total - self._n_mel_done, first_frame=self._n_mel_done
            )
            self._mel.append(frames)
            self._n_mel_done = total

    def poll(self):
        """Return every tick that is now complete in both modalities."""
        audio = self._audio_array()
        accel = self._accel_array()
        self._update_mel(audio)
        if len(audio) >= _TICK_AUDIO_SPAN:
            ready_audio = (len(audio) - _TICK_AUDIO_SPAN) // AUDIO_SAMPLES_PER_TICK + 1
        else:
            ready_audio = 0
        ready = min(ready_audio, accel_tick_count(len(accel)))
        return self._emit(audio, accel, ready)

    def finalize(self):
        """Flush remaining ticks using the batch tail-padding rules."""
        if self._finalized:
            return self._empty()
        audio = self._audio_array()
        accel = self._accel_array()
        self._update_mel(audio)
        n = max(audio_tick_count(len(audio)), accel_tick_count(len(accel)))
        out = self._emit(audio, accel, n, pad=True)
        self._finalized = True
        return out

    @staticmethod
    def _empty():
        return FeatureTimeline(
            np.zeros((0, SPEECH_TICK_DIM), np.float32),
            np.zeros((0, GESTURE_DIM), np.float32),
            np.zeros(0, np.float64),
        )

    def _emit(self, audio, accel, upto, pad=False):
        start = self._emitted
        if upto <= start:
            return self._empty()
        mel = (
            np.concatenate(self._mel)
            if self._mel
            else np.zeros((0, N_MEL), np.float32)
        )
        n_audio = audio_tick_count(len(audio))
        speech_all = (
            speech_tick_blocks(mel, n_audio)
            if n_audio
            else np.zeros((0, SPEECH_TICK_DIM), np.float32)
        )
        gesture_all = gesture_tick_frames(accel, accel_tick_count(len(accel)))
        if pad:
            speech_all = _pad_tail(speech_all, upto, SPEECH_TICK_DIM)
            gesture_all = _pad_tail(gesture_all, upto, GESTURE_DIM)
        self._emitted = upto
        return FeatureTimeline(
            speech=speech_all[start:upto],
            gesture=gesture_all[start:upto],
            tick_times=np.arange(start, upto, dtype=np.float64) * TICK_SECONDS,
        )
