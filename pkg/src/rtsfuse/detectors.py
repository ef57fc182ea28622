"""Streaming 10 Hz unimodal classifiers.

A detector is a causal 1-D conv stack over a short window of tick
features, then flatten and dense layers of width 128 and 32 into K output
logits.  The speech detector is 2-way (no-speech / speech) over a 1 s
context of ten 400-dim stacked-mel tick blocks; the gesture detector is
4-way (raising / raised / dropping / dropped) over a 2 s context of twenty
31-dim statistical frames.

Streaming inference keeps a ring buffer of the most recent window; ticks
before the buffer fills see zero-padded history, so the first tick of a
session already produces a logit vector.  Batch inference over a session
applies the same window per tick, which makes streaming and batch outputs
match to float precision.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import checkpoint as ckpt
from .errors import CheckpointError, InvalidInputError
from .features import GESTURE_DIM, SPEECH_TICK_DIM
from .nn import Conv1D, Dense, count_parameters, relu, relu_grad, softmax

SPEECH_WINDOW_TICKS = 10  # 1 s of 400-dim stacked mel blocks
GESTURE_WINDOW_TICKS = 20  # 2 s of 31-dim statistical frames


@dataclass(frozen=True)
class DetectorConfig:
    modality: str  # "speech" | "gesture"
    n_conv_layers: int = 1
    filters: int = 16
    kernel: int = 5
    # fixed affine input normalization (x - offset) / scale; None picks the
    # modality default (log-mel energies are large and need rescaling)
    input_offset: float | None = None
    input_scale: float | None = None

    def __post_init__(self):
        if self.modality not in ("speech", "gesture"):
            raise InvalidInputError(f"unknown modality {self.modality!r}")
        if self.n_conv_layers not in (1, 3, 5):
            raise InvalidInputError("n_conv_layers must be one of 1, 3, 5")

    @property
    def window_ticks(self):
        return SPEECH_WINDOW_TICKS if self.modality == "speech" else GESTURE_WINDOW_TICKS

    @property
    def input_dim(self):
        return SPEECH_TICK_DIM if self.modality == "speech" else GESTURE_DIM

    @property
    def n_classes(self):
        return 2 if self.modality == "speech" else 4

    @property
    def norm_offset(self):
        if self.input_offset is not None:
            return self.input_offset
        return -6.0 if self.modality == "speech" else 0.0

    @property
    def norm_scale(self):
        if self.input_scale is not None:
            return self.input_scale
        # 3x the raw log-mel spread: keeps freshly initialized logits small
        # so training starts from the uniform-prediction loss ln K
        return 20.0 if self.modality == "speech" else 1.0


class Detector:
    """Conv stack -> flatten -> dense 128 -> dense 32 -> dense K."""

    def __init__(self, config, rng=None, dtype=np.float32):
        self.config = config
        c = config
        self.convs = [Conv1D(c.input_dim, c.filters, c.kernel, rng=rng, dtype=dtype)]
        for _ in range(c.n_conv_layers - 1):
            self.convs.append(Conv1D(c.filters, c.filters, c.kernel, rng=rng, dtype=dtype))
        flat = c.window_ticks * c.filters
        self.dense1 = Dense(flat, 128, rng=rng, dtype=dtype)
        self.dense2 = Dense(128, 32, rng=rng, dtype=dtype)
        self.head = Dense(32, c.n_classes, rng=rng, dtype=dtype)
        self._acts = None

    @property
    def layers(self):
        return [*self.convs, self.dense1, self.dense2, self.head]

    def named_parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"layer{i}.{n}", p) for n, p in layer.named_parameters())
        return out

    def named_gradients(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"layer{i}.{n}", g) for n, g in layer.named_gradients())
        return out

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()

    @property
    def param_count(self):
        return count_parameters(self.layers)

    def forward(self, windows):
        """Window batch [B, W, C] (or one [W, C] window) -> raw logits."""
        windows = np.asarray(windows)
        squeeze = windows.ndim == 2
        if squeeze:
            windows = windows[None]
        cfg = self.config
        if windows.shape[1:] != (cfg.window_ticks, cfg.input_dim):
            raise InvalidInputError(
                f"{cfg.modality} detector expects windows "
                f"[B, {cfg.window_ticks}, {cfg.input_dim}], got {windows.shape}"
            )
        acts = []
        # fixed normalization; warm-up padding stays zero in raw space
        x = (windows - cfg.norm_offset) * np.float32(1.0 / cfg.norm_scale)
        for conv in self.convs:
            pre = conv.forward(x)
            acts.append(pre)
            x = relu(pre)
        flat = x.reshape(len(x), -1)
        pre1 = self.dense1.forward(flat)
        acts.append(pre1)
        pre2 = self.dense2.forward(relu(pre1))
        acts.append(pre2)
        logits = self.head.forward(relu(pre2))
        self._acts = acts
        return logits[0] if squeeze else logits

    def infer(self, windows):
        """Inference forward whose outputs are batch-size invariant.

        Streaming one window at a time and batching a whole session give
        bit-identical logits; training uses ``forward`` (faster BLAS path).
        """
        windows = np.asarray(windows)
        squeeze = windows.ndim == 2
        if squeeze:
            windows = windows[None]
        cfg = self.config
        if windows.shape[1:] != (cfg.window_ticks, cfg.input_dim):
            raise InvalidInputError(
                f"{cfg.modality} detector expects windows "
                f"[B, {cfg.window_ticks}, {cfg.input_dim}], got {windows.shape}"
            )
        x = (windows - cfg.norm_offset) * np.float32(1.0 / cfg.norm_scale)
        for conv in self.convs:
            x = relu(conv.infer(x))
        x = x.reshape(len(x), -1)
        x = relu(self.dense1.infer(x))
        x = relu(self.dense2.infer(x))
        logits = self.head.infer(x)
        return logits[0] if squeeze else logits

    def backward(self, dlogits):
        """Accumulate parameter gradients from upstream logit gradients."""
        if self._acts is None:
            raise RuntimeError("detector backward called before forward")
        acts = self._acts
        d = self.head.backward(np.atleast_2d(dlogits))
        d = self.dense2.backward(relu_grad(d, acts[-1]))
        d = self.dense1.backward(relu_grad(d, acts[-2]))
        d = d.reshape(len(d), self.config.window_ticks, self.config.filters)
        for conv, pre in zip(reversed(self.convs), reversed(acts[:-2])):
            d = conv.backward(relu_grad(d, pre))
        return d

    def astype(self, dtype):
        out = Detector(self.config, dtype=dtype)
        for mine, theirs in zip(out.layers, self.layers):
            for (_, dst), (_, src) in zip(mine.named_parameters(), theirs.named_parameters()):
                dst[...] = src.astype(dtype)
        return out

    # -- persistence ------------------------------------------------------

    def expected_layout(self):
        c = self.config
        layout = [("conv1d", (c.filters, c.kernel, c.input_dim))]
        layout += [("conv1d", (c.filters, c.kernel, c.filters))] * (c.n_conv_layers - 1)
        layout += [
            ("dense", (128, c.window_ticks * c.filters)),
            ("dense", (32, 128)),
            ("dense", (c.n_classes, 32)),
        ]
        return layout

    def save(self, path, precision="fp32"):
        meta = {"kind": "detector", **asdict(self.config),
                "input_offset": self.config.norm_offset,
                "input_scale": self.config.norm_scale,
                "window_ticks": self.config.window_ticks,
                "input_dim": self.config.input_dim,
                "n_classes": self.config.n_classes}
        ckpt.write_checkpoint(path, self.layers, meta=meta, precision=precision)

    @classmethod
    def load(cls, path):
        records, meta, _ = ckpt.read_checkpoint(path)
        if meta.get("kind") != "detector":
            raise CheckpointError(f"{path}: not a detector checkpoint ({meta.get('kind')!r})")
        config = DetectorConfig(
            modality=meta["modality"],
            n_conv_layers=int(meta["n_conv_layers"]),
            filters=int(meta["filters"]),
            kernel=int(meta["kernel"]),
            input_offset=float(meta["input_offset"]),
            input_scale=float(meta["input_scale"]),
        )
        det = cls(config)
        ckpt.validate_records(records, det.expected_layout())
        restored = ckpt.restore_layers(records)
        for mine, theirs in zip(det.layers, restored):
            for (_, dst), (_, src) in zip(mine.named_parameters(), theirs.named_parameters()):
                dst[...] = src
        return det


def session_windows(tick_features, window_ticks):
    """Sliding per-tick windows [T, W, C] with zero-padded warm-up."""
    tick_features = np.asarray(tick_features)
    T, C = tick_features.shape
    padded = np.concatenate(
        [np.zeros((window_ticks - 1, C), dtype=tick_features.dtype), tick_features]
    )
    return sliding_window_view(padded, window_ticks, axis=0).swapaxes(1, 2)


def detector_forward_session(detector, tick_features, batch=512):
    """Batch-mode per-tick logits [T, K] for one session's tick features."""
    windows = session_windows(tick_features, detector.config.window_ticks)
    outs = []
    for i in range(0, len(windows), batch):
        outs.append(detector.infer(np.ascontiguousarray(windows[i : i + batch])))
    return np.concatenate(outs) if outs else np.zeros((0, detector.config.n_classes), np.float32)


class DetectorState:
    """Single-owner streaming state: ring buffer plus timestamp ordering."""

    def __init__(self, detector):
        self.detector = detector
        cfg = detector.config
        self.buffer = np.zeros((cfg.window_ticks, cfg.input_dim), dtype=np.float32)
        self.last_time = -np.inf
        self.ticks_seen = 0

    def reset(self):
        self.buffer[...] = 0.0
        self.last_time = -np.inf
        self.ticks_seen = 0

    def step(self, frame, timestamp=None):
        """Push one tick frame, return this tick's K logits."""
        frame = np.asarray(frame, dtype=np.float32)
        if frame.shape != (self.detector.config.input_dim,):
            raise InvalidInputError(
                f"expected frame of dim {self.detector.config.input_dim}, got {frame.shape}"
            )
        if timestamp is None:
            timestamp = self.ticks_seen * 0.1
        if timestamp <= self.last_time:
            raise InvalidInputError(
                f"out-of-order tick: {timestamp} after {self.last_time}"
            )
        self.last_time = float(timestamp)
        self.ticks_seen += 1
        self.buffer = np.roll(self.buffer, -1, axis=0)
        self.buffer[-1] = frame
        return self.detector.infer(self.buffer)


def predict_frame_labels(detector, tick_features):
    """Per-tick argmax class sequence; ties break toward the lower index."""
    logits = detector_forward_session(detector, tick_features)
    return np.argmax(softmax(logits, axis=-1), axis=-1)
