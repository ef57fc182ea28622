"""Multimodal fusion: GRU neural policy and the hand-designed FSM baseline.

Per decision tick the fusion layer sees a 6-dim vector: the gesture
detector's 4 outputs followed by the speech detector's 2.  The softmax
variant applies a per-modality softmax first (each block then sums to 1);
the logit variant feeds the raw final-layer outputs through unchanged.

The neural policy is a GRU (input 6, hidden 32 or 64) plus a dense layer
to 2 logits; softmax of those yields p_intended per tick.  Discrete
trigger events come from rising-edge detection on p_intended against a
threshold, with a 3 s (30 tick) cooldown after each event.

The FSM baseline consumes smoothed per-modality softmax probabilities and
walks IDLE -> RAISING -> LISTENING -> COOLDOWN using 15 hyperparameters:

    theta_raising / d_raising   sustained raising evidence enters RAISING
    theta_raised / d_raised     sustained raised evidence (within t_wait
                                ticks) confirms the raise and enters
                                LISTENING
    theta_speech / d_speech     sustained speech inside LISTENING (within
                                t_onset ticks) emits the trigger event
    s_gesture / s_speech        trailing moving-average smoothing windows
    hysteresis                  sustained counters start above theta and
                                keep counting above theta - hysteresis;
                                LISTENING also needs the raised
                                probability to stay above
                                theta_raised - hysteresis
    theta_abort                 dropping/dropped evidence above this
                                aborts RAISING or LISTENING back to IDLE
    t_cool                      post-trigger cooldown in ticks
    theta_dropping /            after the cooldown expires the FSM re-arms
    theta_dropped               only once the arm reads down again
                                (dropping or dropped probability above its
                                threshold), preventing re-triggers while
                                the arm never drops

State lives in a per-session object; policies themselves are immutable
after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .errors import CheckpointError, InvalidInputError, MissingArtifactError
from .nn import GRU, Dense, count_parameters, softmax

FUSION_DIM = 6
TRIGGER_COOLDOWN_TICKS = 30  # 3 s at 10 Hz


@dataclass(frozen=True)
class TriggerEvent:
    onset_tick: int
    onset_time: float  # seconds
    peak_score: float
    policy_id: str = ""


def align_and_merge(gesture_outputs, speech_outputs, fusion_type):
    """Concatenate per-tick detector outputs into [T, 6] fusion inputs.

    Order is [gesture(4) | speech(2)].  ``softmax`` applies a per-modality
    softmax first; ``logit`` passes raw values through.
    """
    gesture_outputs = np.asarray(gesture_outputs, dtype=np.float32)
    speech_outputs = np.asarray(speech_outputs, dtype=np.float32)
    if gesture_outputs.ndim != 2 or gesture_outputs.shape[1] != 4:
        raise InvalidInputError(f"gesture outputs must be [T, 4], got {gesture_outputs.shape}")
    if speech_outputs.ndim != 2 or speech_outputs.shape[1] != 2:
        raise InvalidInputError(f"speech outputs must be [T, 2], got {speech_outputs.shape}")
    if len(gesture_outputs) != len(speech_outputs):
        raise InvalidInputError(
            f"modality grids disagree after padding: "
            f"{len(gesture_outputs)} gesture vs {len(speech_outputs)} speech ticks"
        )
    if fusion_type == "softmax":
        gesture_outputs = softmax(gesture_outputs, axis=-1)
        speech_outputs = softmax(speech_outputs, axis=-1)
    elif fusion_type != "logit":
        raise InvalidInputError(f"unknown fusion type {fusion_type!r}")
    return np.concatenate([gesture_outputs, speech_outputs], axis=1)


class NeuralPolicy:
    """GRU(6 -> h) + dense(h -> 2); softmax gives p_intended per tick."""

    def __init__(self, fusion_type, hidden_dim, rng=None, dtype=np.float32,
                 threshold=0.5, policy_id=None):
        if fusion_type not in ("softmax", "logit"):
            raise InvalidInputError(f"unknown fusion type {fusion_type!r}")
        self.fusion_type = fusion_type
        self.hidden_dim = int(hidden_dim)
        self.gru = GRU(FUSION_DIM, hidden_dim, rng=rng, dtype=dtype)
        self.head = Dense(hidden_dim, 2, rng=rng, dtype=dtype)
        self.threshold = float(threshold)
        self.policy_id = policy_id or f"neural-{fusion_type}-h{hidden_dim}"

    @property
    def param_count(self):
        return count_parameters([self.gru, self.head])

    def named_parameters(self):
        out = [(f"gru.{n}", p) for n, p in self.gru.named_parameters()]
        out += [(f"head.{n}", p) for n, p in self.head.named_parameters()]
        return out

    def named_gradients(self):
        out = [(f"gru.{n}", g) for n, g in self.gru.named_gradients()]
        out += [(f"head.{n}", g) for n, g in self.head.named_gradients()]
        return out

    def zero_grads(self):
        self.gru.zero_grads()
        self.head.zero_grads()

    def initial_state(self, batch=None):
        return self.gru.initial_state(batch)

    def step(self, x, h):
        """One tick: fusion input [6] -> (p_intended, new hidden state)."""
        x = np.asarray(x, dtype=self.gru.W_ih.dtype)
        if x.shape != (FUSION_DIM,):
            raise InvalidInputError(f"fusion input must have dim {FUSION_DIM}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("non-finite fusion input")
        h_new = self.gru.step(x, h)
        probs = softmax(self.head.infer(h_new))
        return float(probs[1]), h_new

    def score_sequence(self, xs):
        """p_intended per tick for one session's [T, 6] inputs.

        The hidden state starts at zero and persists across the session;
        sessions are independent, so call this per session.
        """
        xs = np.asarray(xs, dtype=self.gru.W_ih.dtype)
        if xs.ndim != 2 or xs.shape[1] != FUSION_DIM:
            raise InvalidInputError(f"expected [T, {FUSION_DIM}] inputs, got {xs.shape}")
        hs = self.gru.forward(xs[None])[0]
        logits = self.head.infer(hs)
        return softmax(logits, axis=-1)[:, 1].astype(np.float64)

    # -- persistence ------------------------------------------------------

    def save(self, path, precision="fp32"):
        meta = {
            "kind": "neural_policy",
            "fusion_type": self.fusion_type,
            "hidden_dim": self.hidden_dim,
            "threshold": self.threshold,
            "policy_id": self.policy_id,
        }
        ckpt.write_checkpoint(path, [self.gru, self.head], meta=meta, precision=precision)

    @classmethod
    def load(cls, path):
        records, meta, _ = ckpt.read_checkpoint(path)
        if meta.get("kind") != "neural_policy":
            raise CheckpointError(f"{path}: not a neural policy checkpoint")
        policy = cls(meta["fusion_type"], int(meta["hidden_dim"]),
                     threshold=float(meta.get("threshold", 0.5)),
                     policy_id=meta.get("policy_id"))
        ckpt.validate_records(records, [
            ("gru", (FUSION_DIM, policy.hidden_dim)),
            ("dense", (2, policy.hidden_dim)),
        ])
        restored = ckpt.restore_layers(records)
        for mine, theirs in zip([policy.gru, policy.head], restored):
            for (_, dst), (_, src) in zip(mine.named_parameters(), theirs.named_parameters()):
                dst[...] = src
        return policy


def moving_average(x, window):
    """Trailing moving average: y[t] = mean(x[max(0, t-w+1) .. t])."""
    x = np.asarray(x, dtype=np.float64)
    w = int(window)
    if w <= 1 or len(x) == 0:
        return x.copy()
    csum = np.cumsum(x, axis=0)
    out = np.empty_like(csum)
    head = min(w - 1, len(x))
    counts = np.arange(1, head + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    out[:head] = csum[:head] / counts
    if len(x) >= w:
        out[w - 1 :] = csum[w - 1 :].copy()
        out[w:] -= csum[:-w]
        out[w - 1 :] /= w
    return out


@dataclass(frozen=True)
class FsmConfig:
    """The FSM baseline's 15 hyperparameters."""

    theta_raising: float = 0.5
    theta_raised: float = 0.5
    theta_dropping: float = 0.6
    theta_dropped: float = 0.6
    theta_speech: float = 0.5
    d_raising: int = 2
    d_raised: int = 2
    d_speech: int = 3
    t_wait: int = 20
    t_onset: int = 30
    s_gesture: int = 3
    s_speech: int = 3
    t_cool: int = 30
    hysteresis: float = 0.05
    theta_abort: float = 0.9

    THRESHOLD_FIELDS = (
        "theta_raising", "theta_raised", "theta_dropping", "theta_dropped",
        "theta_speech", "hysteresis", "theta_abort",
    )
    DURATION_FIELDS = (
        "d_raising", "d_raised", "d_speech", "t_wait", "t_onset",
        "s_gesture", "s_speech", "t_cool",
    )

    def __post_init__(self):
        for name in self.THRESHOLD_FIELDS:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidInputError(f"{name}={v} outside [0, 1]")
        for name in self.DURATION_FIELDS:
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise InvalidInputError(f"{name}={v} must be a positive integer tick count")

    def save(self, path):
        lines = [f"{k}={v}" for k, v in sorted(asdict(self).items())]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"fsm config not found: {path}")
        kwargs = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            kwargs[key] = int(value) if key in cls.DURATION_FIELDS else float(value)
        return cls(**kwargs)


IDLE, RAISING, LISTENING, COOLDOWN = "idle", "raising", "listening", "cooldown"


@dataclass
class FsmState:
    state: str = IDLE
    count: int = 0  # sustained-evidence counter for the current state
    timer: int = 0  # ticks remaining for t_wait / t_onset / t_cool
    tick: int = -1


class FsmPolicy:
    """Deterministic finite-state trigger policy over smoothed scores."""

    def __init__(self, config=None, policy_id="fsm"):
        self.config = config or FsmConfig()
        self.policy_id = policy_id

    @property
    def param_count(self):
        return 15

    def new_state(self):
        return FsmState()

    def _sustained(self, count, value, theta):
        """Hysteresis counter: enter above theta, continue above theta - h."""
        if count == 0:
            return 1 if value > theta else 0
        return count + 1 if value > theta - self.config.hysteresis else 0

    def step(self, state, gesture_probs, speech_prob):
        """Advance one tick.  Returns (state, TriggerEvent | None)."""
        cfg = self.config
        g_raising, g_raised, g_dropping, g_dropped = (float(v) for v in gesture_probs)
        s = float(speech_prob)
        state.tick += 1
        event = None

        if state.state == IDLE:
            state.count = self._sustained(state.count, g_raising, cfg.theta_raising)
            if state.count >= cfg.d_raising:
                state.state = RAISING
                state.count = 0
                state.timer = cfg.t_wait
        elif state.state == RAISING:
            if g_dropping > cfg.theta_abort or g_dropped > cfg.theta_abort:
                state.state, state.count = IDLE, 0
            else:
                state.timer -= 1
                state.count = self._sustained(state.count, g_raised, cfg.theta_raised)
                if state.count >= cfg.d_raised:
                    state.state = LISTENING
                    state.count = 0
                    state.timer = cfg.t_onset
                elif state.timer <= 0:
                    state.state, state.count = IDLE, 0
        elif state.state == LISTENING:
            if (
                g_dropping > cfg.theta_abort
                or g_dropped > cfg.theta_abort
                or g_raised <= cfg.theta_raised - cfg.hysteresis
            ):
                state.state, state.count = IDLE, 0
            else:
                state.timer -= 1
                state.count = self._sustained(state.count, s, cfg.theta_speech)
                if state.count >= cfg.d_speech:
                    event = TriggerEvent(
                        onset_tick=state.tick,
                        onset_time=state.tick / 10.0,
                        peak_score=s,
                        policy_id=self.policy_id,
                    )
                    state.state, state.count = COOLDOWN, 0
                    state.timer = cfg.t_cool
                elif state.timer <= 0:
                    state.state, state.count = IDLE, 0
        else:  # COOLDOWN: wait out t_cool, then re-arm once the arm is down
            state.timer -= 1
            if state.timer <= 0 and (
                g_dropped > cfg.theta_dropped or g_dropping > cfg.theta_dropping
            ):
                state.state, state.count = IDLE, 0
        return state, event

    def run(self, gesture_probs, speech_probs):
        """Smooth one session's per-tick softmax scores and walk the FSM."""
        gesture_probs = np.asarray(gesture_probs, dtype=np.float64)
        speech_probs = np.asarray(speech_probs, dtype=np.float64)
        if gesture_probs.ndim != 2 or gesture_probs.shape[1] != 4:
            raise InvalidInputError(f"gesture probs must be [T, 4], got {gesture_probs.shape}")
        if len(speech_probs) != len(gesture_probs):
            raise InvalidInputError("speech/gesture tick counts disagree")
        g = moving_average(gesture_probs, self.config.s_gesture)
        s = moving_average(speech_probs, self.config.s_speech)
        state = self.new_state()
        events = []
        for t in range(len(g)):
            state, event = self.step(state, g[t], s[t])
            if event is not None:
                events.append(event)
        return events

    def run_fusion_inputs(self, fusion_inputs):
        """Run on [T, 6] softmax-variant inputs ([gesture(4) | speech(2)])."""
        fusion_inputs = np.asarray(fusion_inputs)
        if fusion_inputs.ndim != 2 or fusion_inputs.shape[1] != FUSION_DIM:
            raise InvalidInputError(f"expected [T, {FUSION_DIM}] inputs")
        return self.run(fusion_inputs[:, :4], fusion_inputs[:, 5])


def decide_triggers(p_intended, threshold, cooldown=TRIGGER_COOLDOWN_TICKS, policy_id=""):
    """Rising-edge trigger extraction with a refractory cooldown.

    An event fires at the first tick where p >= threshold after being
    below it (the start of the trace counts as below); edges within
    ``cooldown`` ticks of the previous event are suppressed.
    """
    if not (0.0 < threshold < 1.0):
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    p = np.asarray(p_intended, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidInputError("p_intended must be a 1-D trace")
    above = p >= threshold
    edges = np.nonzero(above & ~np.concatenate(([False], above[:-1])))[0]
    events = []
    last = -(cooldown + 1)
    for t in edges:
        if t - last > cooldown:
            window_end = min(len(p), t + cooldown + 1)
            events.append(
                TriggerEvent(
                    onset_tick=int(t),
                    onset_time=t / 10.0,
                    peak_score=float(np.max(p[t:window_end])),
                    policy_id=policy_id,
                )
            )
            last = t
    return events
