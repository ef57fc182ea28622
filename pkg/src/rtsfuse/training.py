"""Sequential training: detectors first, then fusion on their frozen outputs.

The pipeline caches heavy intermediates to disk so each stage is cheap to
re-run:

* ``FeatureCache``: per-tick speech blocks [T, 400], gesture frames
  [T, 31], and labels for every session, concatenated into flat ``.npy``
  arrays plus a JSONL index (session id, split, offsets, intent, onsets).
* ``ScoreCache``: frozen detectors run over the feature cache; aligned
  [T, 6] fusion inputs per session for one fusion type, persisted next to
  the per-tick intent labels.

Detectors train with Adam on the summed frame-wise cross-entropy over
window batches (whole sessions per step), with inverse-frequency class
weights so sparse classes are not drowned out; the best
validation-frame-accuracy parameters are kept.  The neural policy trains
on cached scores with sessions padded into batches (padding contributes
zero gradient), keeping the best validation-EER parameters.  The FSM is
tuned by seeded random search over its 15 hyperparameters, minimizing
validation (FRR + FAR)/2; the default configuration is always sample 0,
so the result can never be worse than the default.
"""

from __future__ import annotations


import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detectors import Detector, DetectorConfig, detector_forward_session, session_windows
from .errors import InvalidInputError, MissingArtifactError
from .evaluation import ScoredSession, compute_det_eer, fsm_operating_point
from .features import streaming_featurize
from .fusion import FUSION_DIM, FsmConfig, FsmPolicy, NeuralPolicy, align_and_merge
from .nn import Adam, cross_entropy

__all__ = [
    "TrainConfig",
    "FeatureCache",
    "ScoreCache",
    "train_detector",
    "score_corpus",
    "train_neural_policy",
    "tune_fsm",
    "run_sweep",
    "CANDIDATES",
    "enumerate_sweep",
]


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-3
    batch_sessions: int = 8
    seed: int = 0
    patience: int | None = None
    class_weighting: bool = True
    eval_grid: int = 64  # DET sweep resolution for per-epoch model selection

    def __post_init__(self):
        if self.epochs <= 0:
            raise InvalidInputError("epochs must be positive")
        if self.lr <= 0:
            raise InvalidInputError("learning rate must be positive")


@dataclass
class CachedSession:
    session_id: str
    split: str
    subject_id: str
    intent: int
    challenge: str | None
    onsets: list
    offset: int
    n_ticks: int


class _TickCache:
    """Flat concatenated per-tick arrays plus a session index."""

    INDEX_NAME = "index.jsonl"
    ARRAYS: tuple = ()

    def __init__(self, root, arrays):
        self.root = Path(root)
        self.arrays = arrays  # name -> memory-mapped ndarray
        self.index = []
        for line in (self.root / self.INDEX_NAME).read_text().splitlines():
            if line.strip():
                self.index.append(CachedSession(**json.loads(line)))

    def sessions(self, split=None):
        for rec in self.index:
            if split is None or rec.split == split:
                yield rec

    def slice(self, name, rec):
        return self.arrays[name][rec.offset : rec.offset + rec.n_ticks]

    @classmethod
    def load(cls, root):
        root = Path(root)
        if not (root / cls.INDEX_NAME).exists():
            raise MissingArtifactError(f"cache missing or incomplete: {root}")
        arrays = {
            name: np.load(root / f"{name}.npy", mmap_mode="r") for name in cls.ARRAYS
        }
        return cls(root, arrays)

    @staticmethod
    def _write_index(root, records):
        lines = [
            json.dumps(
                {
                    "session_id": r.session_id,
                    "split": r.split,
                    "subject_id": r.subject_id,
                    "intent": r.intent,
                    "challenge": r.challenge,
                    "onsets": list(map(float, r.onsets)),
                    "offset": r.offset,
                    "n_ticks": r.n_ticks,
                },
                sort_keys=True,
            )
            for r in records
        ]
        (Path(root) / _TickCache.INDEX_NAME).write_text("\n".join(lines) + "\n")


def _with_offset(rec, offset):
    return CachedSession(
        session_id=rec.session_id,
        split=rec.split,
        subject_id=rec.subject_id,
        intent=rec.intent,
        challenge=rec.challenge,
        onsets=rec.onsets,
        offset=offset,
        n_ticks=rec.n_ticks,
    )


class FeatureCache(_TickCache):
    ARRAYS = ("speech", "gesture", "labels")

    @classmethod
    def build(cls, corpus, out_dir, progress=None, threads=1):
        from .synthgen import _parallel_map

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        def featurize(rec):
            session = corpus.load(rec)
            tl = streaming_featurize(session.audio, session.accel)
            n = min(tl.n_ticks, session.n_ticks)
            labels = np.stack(
                [
                    session.speech_labels[:n],
                    session.gesture_labels[:n],
                    session.intent_labels[:n],
                ],
                axis=1,
            )
            return tl.speech[:n], tl.gesture[:n], labels, session.trigger_onsets

        speech_parts, gesture_parts, label_parts, records = [], [], [], []
        offset = 0
        results = _parallel_map(featurize, corpus.records, threads, progress)
        for rec, (speech, gesture, labels, onsets) in zip(corpus.records, results):
            speech_parts.append(speech)
            gesture_parts.append(gesture)
            label_parts.append(labels)
            records.append(
                CachedSession(
                    session_id=rec.session_id,
                    split=rec.split,
                    subject_id=rec.subject_id,
                    intent=rec.intent,
                    challenge=rec.challenge,
                    onsets=list(map(float, onsets)),
                    offset=offset,
                    n_ticks=len(labels),
                )
            )
            offset += len(labels)
        np.save(out_dir / "speech.npy", np.concatenate(speech_parts))
        np.save(out_dir / "gesture.npy", np.concatenate(gesture_parts))
        np.save(out_dir / "labels.npy", np.concatenate(label_parts))
        cls._write_index(out_dir, records)
        return cls.load(out_dir)


class ScoreCache(_TickCache):
    ARRAYS = ("fusion", "intent")

    @classmethod
    def build(cls, speech_detector, gesture_detector, fcache, fusion_type, out_dir,
              progress=None):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        fusion_parts, intent_parts, records = [], [], []
        offset = 0
        index = list(fcache.sessions())
        for i, rec in enumerate(index):
            s_logits = detector_forward_session(speech_detector, fcache.slice("speech", rec))
            g_logits = detector_forward_session(gesture_detector, fcache.slice("gesture", rec))
            fusion_parts.append(align_and_merge(g_logits, s_logits, fusion_type))
            intent_parts.append(np.asarray(fcache.slice("labels", rec)[:, 2], dtype=np.uint8))
            records.append(_with_offset(rec, offset))
            offset += rec.n_ticks
            if progress is not None:
                progress(i + 1, len(index))
        np.save(out_dir / "fusion.npy", np.concatenate(fusion_parts))
        np.save(out_dir / "intent.npy", np.concatenate(intent_parts))
        cls._write_index(out_dir, records)
        (out_dir / "fusion_type.txt").write_text(fusion_type + "\n")
        return cls.load(out_dir)

    @classmethod
    def load(cls, root):
        cache = super().load(root)
        cache.fusion_type = (Path(root) / "fusion_type.txt").read_text().strip()
        return cache


def balanced_class_weights(labels, n_classes):
    """Inverse-frequency weights n/(K*n_k); uniform prediction still costs ln K."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
    counts = np.maximum(counts.astype(np.float64), 1.0)
    return (counts.sum() / (n_classes * counts)).astype(np.float32)


def _one_hot(labels, k):
    return np.eye(k, dtype=np.float32)[np.asarray(labels, dtype=np.int64)]


def train_detector(modality, fcache, det_config=None, config=None, log_path=None,
                   progress=None):
    """Train one unimodal detector; returns (detector, history).

    History rows carry per-epoch train loss (mean per frame) and validation
    frame accuracy; the returned detector holds the best-validation
    parameters.
    """
    det_config = det_config or DetectorConfig(modality=modality)
    if det_config.modality != modality:
        raise InvalidInputError("det_config modality disagrees with requested modality")
    config = config or TrainConfig()
    feature_key = "speech" if modality == "speech" else "gesture"
    label_col = 0 if modality == "speech" else 1
    k = det_config.n_classes

    train_recs = list(fcache.sessions("train"))
    val_recs = list(fcache.sessions("val"))
    if not train_recs:
        raise MissingArtifactError("feature cache has no training sessions")

    all_train_labels = np.concatenate(
        [fcache.slice("labels", r)[:, label_col] for r in train_recs]
    )
    weights = (
        balanced_class_weights(all_train_labels, k) if config.class_weighting else None
    )

    rng = np.random.default_rng([config.seed, 11])
    detector = Detector(det_config, rng=rng)
    opt = Adam(detector.named_parameters(), lr=config.lr)

    def batch_arrays(recs):
        windows = []
        labels = []
        for r in recs:
            feats = np.asarray(fcache.slice(feature_key, r))
            windows.append(session_windows(feats, det_config.window_ticks))
            labels.append(fcache.slice("labels", r)[:, label_col])
        return (
            np.ascontiguousarray(np.concatenate(windows)),
            np.concatenate(labels),
        )

    def val_accuracy():
        correct = 0
        total = 0
        for r in val_recs:
            feats = np.asarray(fcache.slice(feature_key, r))
            logits = detector_forward_session(detector, feats)
            pred = np.argmax(logits, axis=-1)
            truth = fcache.slice("labels", r)[:, label_col]
            correct += int(np.sum(pred == truth))
            total += len(truth)
        return correct / max(total, 1)

    # pre-update loss over a broad sample; freshly initialized models sit
    # near the uniform-prediction loss ln K
    probe_windows, probe_labels = batch_arrays(train_recs[:64])
    probe_loss, _ = cross_entropy(
        detector.forward(probe_windows), _one_hot(probe_labels, k), class_weights=weights
    )
    initial_loss = probe_loss / len(probe_labels)

    history = []
    best = (-1.0, None)
    stale = 0
    log_lines = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_recs))
        losses = []
        for i in range(0, len(order), config.batch_sessions):
            chunk = [train_recs[j] for j in order[i : i + config.batch_sessions]]
            windows, labels = batch_arrays(chunk)
            logits = detector.forward(windows)
            loss, dlogits = cross_entropy(logits, _one_hot(labels, k), class_weights=weights)
            detector.zero_grads()
            detector.backward(dlogits)
            opt.step([g for _, g in detector.named_gradients()])
            losses.append(loss / len(labels))
        acc = val_accuracy() if val_recs else float("nan")
        row = {"epoch": epoch, "train_loss": float(np.mean(losses)),
               "val_accuracy": acc, "initial_loss": float(initial_loss)}
        history.append(row)
        log_lines.append(json.dumps(row, sort_keys=True))
        if progress is not None:
            progress(epoch + 1, config.epochs, row)
        if not val_recs or acc > best[0]:
            best = (acc, [p.copy() for _, p in detector.named_parameters()])
            stale = 0
        else:
            stale += 1
            if config.patience is not None and stale > config.patience:
                break
    if best[1] is not None:
        for (_, p), saved in zip(detector.named_parameters(), best[1]):
            p[...] = saved
    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n")
    return detector, history


def score_corpus(speech_detector, gesture_detector, fcache, fusion_type, out_dir,
                 progress=None):
    """Freeze the detectors and persist aligned [T, 6] sequences + intent."""
    return ScoreCache.build(
        speech_detector, gesture_detector, fcache, fusion_type, out_dir, progress
    )


def policy_scored_sessions(policy, cache, split=None):
    """ScoredSessions for a neural policy over one cache split."""
    scored = []
    for rec in cache.sessions(split):
        xs = np.asarray(cache.slice("fusion", rec), dtype=np.float32)
        scored.append(
            ScoredSession(
                session_id=rec.session_id,
                intent=rec.intent,
                n_ticks=rec.n_ticks,
                truth_onsets=np.asarray(rec.onsets, dtype=np.float64),
                p_intended=policy.score_sequence(xs),
                challenge=rec.challenge,
            )
        )
    return scored


def fsm_scored_sessions(policy, cache, split=None):
    """ScoredSessions (fixed events) for an FSM over softmax-variant scores."""
    if cache.fusion_type != "softmax":
        raise InvalidInputError("the FSM consumes softmax-variant score caches")
    scored = []
    for rec in cache.sessions(split):
        xs = np.asarray(cache.slice("fusion", rec), dtype=np.float64)
        scored.append(
            ScoredSession(
                session_id=rec.session_id,
                intent=rec.intent,
                n_ticks=rec.n_ticks,
                truth_onsets=np.asarray(rec.onsets, dtype=np.float64),
                events=policy.run_fusion_inputs(xs),
                challenge=rec.challenge,
            )
        )
    return scored


def _pad_batch(cache, recs):
    """Pad sessions to a common length: inputs, labels, and a real-tick mask."""
    t_max = max(r.n_ticks for r in recs)
    xs = np.zeros((len(recs), t_max, FUSION_DIM), dtype=np.float32)
    labels = np.zeros((len(recs), t_max), dtype=np.int64)
    mask = np.zeros((len(recs), t_max), dtype=np.float32)
    for i, r in enumerate(recs):
        xs[i, : r.n_ticks] = cache.slice("fusion", r)
        labels[i, : r.n_ticks] = cache.slice("intent", r)
        mask[i, : r.n_ticks] = 1.0
    return xs, labels, mask


def train_neural_policy(cache, hidden_dim, config=None, allow_any_hidden=False,
                        log_path=None, progress=None):
    """Train the GRU fusion policy on cached detector outputs.

    Keeps the parameters from the epoch with the best validation EER.
    """
    if hidden_dim not in (32, 64) and not allow_any_hidden:
        raise InvalidInputError(
            f"hidden_dim {hidden_dim} outside the sweep {{32, 64}}; "
            "pass allow_any_hidden=True to override"
        )
    config = config or TrainConfig()
    rng = np.random.default_rng([config.seed, 13])
    policy = NeuralPolicy(cache.fusion_type, hidden_dim, rng=rng)
    opt = Adam(policy.named_parameters(), lr=config.lr)

    train_recs = list(cache.sessions("train"))
    if not train_recs:
        raise MissingArtifactError("score cache has no training sessions")
    intents = np.concatenate([cache.slice("intent", r) for r in train_recs])
    weights = balanced_class_weights(intents, 2) if config.class_weighting else None

    probe_xs, probe_labels, probe_mask = _pad_batch(cache, train_recs[:64])
    probe_real = probe_mask > 0
    probe_logits = policy.head.forward(policy.gru.forward(probe_xs))
    probe_loss, _ = cross_entropy(
        probe_logits[probe_real], _one_hot(probe_labels[probe_real], 2), class_weights=weights
    )
    initial_loss = probe_loss / max(int(probe_real.sum()), 1)

    history = []
    best = (np.inf, None)
    stale = 0
    log_lines = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_recs))
        losses = []
        n_frames = 0
        for i in range(0, len(order), config.batch_sessions):
            chunk = [train_recs[j] for j in order[i : i + config.batch_sessions]]
            xs, labels, mask = _pad_batch(cache, chunk)
            hs = policy.gru.forward(xs)
            logits = policy.head.forward(hs)
            loss, dlogits = cross_entropy(logits, _one_hot(labels, 2), class_weights=weights)
            # padded ticks must not contribute gradient or loss
            dlogits *= mask[:, :, None]
            real = mask > 0
            loss_real, _ = cross_entropy(
                logits[real], _one_hot(labels[real], 2), class_weights=weights
            )
            policy.zero_grads()
            dhs = policy.head.backward(dlogits)
            policy.gru.backward(dhs)
            opt.step([g for _, g in policy.named_gradients()])
            losses.append(loss_real)
            n_frames += int(real.sum())
        scored = policy_scored_sessions(policy, cache, "val")
        # selection metric: robust EER estimate from the coarse sweep
        curve, _ = compute_det_eer(scored, n_grid=config.eval_grid, refine=False)
        val_eer = float(np.min(np.maximum(curve.frr, curve.far)))
        row = {
            "epoch": epoch,
            "train_loss": float(np.sum(losses) / max(n_frames, 1)),
            "val_eer": val_eer,
            "initial_loss": float(initial_loss),
        }
        history.append(row)
        log_lines.append(json.dumps(row, sort_keys=True))
        if progress is not None:
            progress(epoch + 1, config.epochs, row)
        if val_eer < best[0]:
            best = (val_eer, [p.copy() for _, p in policy.named_parameters()])
            stale = 0
        else:
            stale += 1
            if config.patience is not None and stale > config.patience:
                break
    if best[1] is not None:
        for (_, p), saved in zip(policy.named_parameters(), best[1]):
            p[...] = saved
    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n")
    return policy, history


# -- FSM tuning -------------------------------------------------------------


def _sample_fsm_config(rng):
    return FsmConfig(
        theta_raising=float(rng.uniform(0.2, 0.9)),
        theta_raised=float(rng.uniform(0.2, 0.9)),
        theta_dropping=float(rng.uniform(0.3, 0.95)),
        theta_dropped=float(rng.uniform(0.3, 0.95)),
        theta_speech=float(rng.uniform(0.2, 0.9)),
        d_raising=int(rng.integers(1, 6)),
        d_raised=int(rng.integers(1, 6)),
        d_speech=int(rng.integers(1, 8)),
        t_wait=int(rng.integers(5, 41)),
        t_onset=int(rng.integers(10, 61)),
        s_gesture=int(rng.integers(1, 10)),
        s_speech=int(rng.integers(1, 10)),
        t_cool=int(rng.integers(10, 51)),
        hysteresis=float(rng.uniform(0.0, 0.2)),
        theta_abort=float(rng.uniform(0.5, 1.0)),
    )


def fsm_objective(config, cache, split="val"):
    """(FRR + clipped per-session FAR) / 2 at the FSM's operating point."""
    policy = FsmPolicy(config)
    scored = fsm_scored_sessions(policy, cache, split)
    _, comparison = fsm_operating_point(scored)
    return comparison


def tune_fsm(cache, budget=2000, seed=0, split="val", progress=None):
    """Seeded random search over the 15-dim FSM hyperparameter space.

    Sample 0 is always the default configuration, so the tuned objective
    never exceeds the default's.  Returns (FsmConfig, objective, history).
    """
    if budget <= 0:
        raise InvalidInputError("tuning budget must be positive")
    rng = np.random.default_rng([seed, 17])
    best_cfg = None
    best_obj = np.inf
    history = []
    for i in range(budget):
        cfg = FsmConfig() if i == 0 else _sample_fsm_config(rng)
        obj = fsm_objective(cfg, cache, split)
        history.append(obj)
        if obj < best_obj:
            best_obj, best_cfg = obj, cfg
        if progress is not None and (i + 1) % 100 == 0:
            progress(i + 1, budget, best_obj)
    return best_cfg, best_obj, history


# -- experiment sweep ---------------------------------------------------------

# the six hand-picked candidates: (n_speech, n_gesture, fusion, hidden_dim)
CANDIDATES = {
    "a": (1, 1, "fsm", None),
    "b": (1, 1, "softmax", 32),
    "c": (1, 1, "softmax", 64),
    "d": (1, 1, "logit", 64),
    "e": (3, 1, "logit", 64),
    "f": (5, 1, "logit", 64),
}


def enumerate_sweep():
    """All 54 sweep variants: 36 neural plus 18 FSM combinations.

    Neural: h in {32, 64} x n_s in {1,3,5} x n_g in {1,3,5} x fusion in
    {softmax, logit}.  The FSM has no hidden size; its 18 combinations are
    n_s x n_g x two tuning seeds.
    """
    keys = []
    for ns in (1, 3, 5):
        for ng in (1, 3, 5):
            for fusion in ("softmax", "logit"):
                for h in (32, 64):
                    keys.append(f"ns{ns}_ng{ng}_{fusion}_h{h}")
            for tuning_seed in (0, 1):
                keys.append(f"ns{ns}_ng{ng}_fsm_t{tuning_seed}")
    assert len(keys) == 54
    return keys


def parse_variant(key):
    """Sweep key -> (n_speech, n_gesture, fusion, hidden_dim, tuning_seed)."""
    if key in CANDIDATES:
        ns, ng, fusion, h = CANDIDATES[key]
        return ns, ng, fusion, h, 0
    parts = key.split("_")
    try:
        ns = int(parts[0].removeprefix("ns"))
        ng = int(parts[1].removeprefix("ng"))
        fusion = parts[2]
        if fusion == "fsm":
            return ns, ng, "fsm", None, int(parts[3].removeprefix("t"))
        return ns, ng, fusion, int(parts[3].removeprefix("h")), 0
    except (IndexError, ValueError):
        raise InvalidInputError(f"unknown sweep variant {key!r}") from None


@dataclass
class SweepRow:
    variant: str
    n_speech_layers: int
    n_gesture_layers: int
    fusion: str
    hidden_dim: int | None
    speech_params: int
    gesture_params: int
    policy_params: int
    eer: float
    comparison_is_single_point: bool


class SweepRunner:
    """Trains shared detectors/caches once per configuration and reuses them."""

    def __init__(self, fcache, config, work_dir, fsm_budget=2000, progress=None):
        self.fcache = fcache
        self.config = config
        self.work_dir = Path(work_dir)
        self.fsm_budget = fsm_budget
        self.progress = progress or (lambda *a, **k: None)
        self._detectors = {}
        self._caches = {}

    def detector(self, modality, n_layers):
        key = (modality, n_layers)
        if key not in self._detectors:
            self.progress(f"training {modality} detector n={n_layers}")
            det, _ = train_detector(
                modality,
                self.fcache,
                det_config=DetectorConfig(modality=modality, n_conv_layers=n_layers),
                config=self.config,
            )
            path = self.work_dir / "detectors" / f"{modality}_n{n_layers}.rtsf"
            path.parent.mkdir(parents=True, exist_ok=True)
            det.save(path)
            self._detectors[key] = det
        return self._detectors[key]

    def cache(self, ns, ng, fusion_type):
        key = (ns, ng, fusion_type)
        if key not in self._caches:
            speech = self.detector("speech", ns)
            gesture = self.detector("gesture", ng)
            out = self.work_dir / "scores" / f"ns{ns}_ng{ng}_{fusion_type}"
            self.progress(f"scoring corpus ns={ns} ng={ng} fusion={fusion_type}")
            self._caches[key] = score_corpus(speech, gesture, self.fcache, fusion_type, out)
        return self._caches[key]

    def run_variant(self, key):
        ns, ng, fusion, h, tuning_seed = parse_variant(key)
        speech = self.detector("speech", ns)
        gesture = self.detector("gesture", ng)
        if fusion == "fsm":
            cache = self.cache(ns, ng, "softmax")
            self.progress(f"tuning fsm for {key}")
            cfg, _, _ = tune_fsm(
                cache, budget=self.fsm_budget, seed=self.config.seed + tuning_seed
            )
            policy = FsmPolicy(cfg, policy_id=f"fsm-{key}")
            scored = fsm_scored_sessions(policy, cache, "test")
            _, comparison = fsm_operating_point(scored)
            eer = comparison
            policy_params = policy.param_count
            single_point = True
            self._save_policy(key, policy)
        else:
            cache = self.cache(ns, ng, fusion)
            self.progress(f"training policy for {key}")
            policy, _ = train_neural_policy(cache, h, config=self.config)
            scored = policy_scored_sessions(policy, cache, "test")
            _, eer = compute_det_eer(scored, n_grid=self.config.eval_grid)
            policy_params = policy.param_count
            single_point = False
            self._save_policy(key, policy)
        return SweepRow(
            variant=key,
            n_speech_layers=ns,
            n_gesture_layers=ng,
            fusion=fusion,
            hidden_dim=h,
            speech_params=speech.param_count,
            gesture_params=gesture.param_count,
            policy_params=policy_params,
            eer=float(eer),
            comparison_is_single_point=single_point,
        )

    def _save_policy(self, key, policy):
        out = self.work_dir / "policies"
        out.mkdir(parents=True, exist_ok=True)
        if isinstance(policy, FsmPolicy):
            policy.config.save(out / f"{key}.fsm")
        else:
            policy.save(out / f"{key}.rtsf")


def run_sweep(fcache, variants=None, config=None, work_dir=".", fsm_budget=2000,
              progress=None):
    """Train, tune, and evaluate the requested variants end to end.

    Defaults to the six hand-picked candidates (a)-(f).  Returns rows
    shaped like the comparison table: variant, per-detector parameter
    counts, policy parameter count, and EER (the FSM's number is its
    single tuned operating point, reported as (FRR + FAR)/2).
    """
    variants = list(variants or CANDIDATES)
    for key in variants:
        parse_variant(key)  # validate all keys up front
    runner = SweepRunner(fcache, config or TrainConfig(), work_dir,
                         fsm_budget=fsm_budget, progress=progress)
    return [runner.run_variant(key) for key in variants]


def sweep_rows_to_csv(rows, path):
    lines = ["variant,n_speech,n_gesture,fusion,h_dim,#Speech,#Gesture,#NP,EER"]
    for r in rows:
        lines.append(
            f"{r.variant},{r.n_speech_layers},{r.n_gesture_layers},{r.fusion},"
            f"{r.hidden_dim if r.hidden_dim is not None else ''},"
            f"{r.speech_params},{r.gesture_params},{r.policy_params},{r.eer:.4f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def sweep_rows_to_text(rows):
    header = f"{'variant':>10} {'#Speech':>9} {'#Gesture':>9} {'#NP':>7} {'EER%':>7}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.variant:>10} {r.speech_params:>9} {r.gesture_params:>9} "
            f"{r.policy_params:>7} {100 * r.eer:>6.1f}{'*' if r.comparison_is_single_point else ''}"
        )
    lines.append("* single tuned operating point, (FRR+FAR)/2")
    return "\n".join(lines)
