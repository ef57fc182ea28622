"""Event-level evaluation: FRR/FAR, DET curves, EER, breakdowns, benchmarks.

Trigger matching is greedy one-to-one in time order: a prediction counts
as a hit when it falls within [onset - 0.5 s, onset + 2.0 s] of a not yet
matched truth onset; unmatched predictions are false accepts, unmatched
truths are misses.  FRR = misses / total truths.  FAR is reported both
per negative session and per hour of negative audio; the DET curve uses
the per-negative-session rate clipped to [0, 1] so both axes share a
scale.

The equal error rate is the crossing of FRR(theta) and FAR(theta).  Both
are step functions that only change when theta passes a score value, so
for score sets up to ``EXACT_TICK_LIMIT`` ticks the crossing is found by
exact enumeration of the unique scores (first pair, ascending, where
FRR - FAR changes sign, then linear interpolation between the two step
values).  Larger sets use the 200-point log sweep plus recursive
subdivision of the first sign-change bracket, which converges to the same
jump; either way the reported DET curve itself is sampled on the sweep
grid.

The FSM baseline has no threshold to sweep: it contributes one operating
point, and its comparison number is (FRR + FAR)/2 at that point.
"""

from __future__ import annotations

import os
import platform
import resource
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NumericFailureError
from .features import gesture_featurize, mel_featurize
from .fusion import (
    FUSION_DIM,
    FsmPolicy,
    NeuralPolicy,
    TriggerEvent,
    align_and_merge,
    decide_triggers,
    moving_average,
    softmax,
)

MATCH_BEFORE_S = 0.5
MATCH_AFTER_S = 2.0
EXACT_TICK_LIMIT = 12_000
DEFAULT_THETA_GRID = 200


@dataclass
class MatchResult:
    hits: int
    misses: int
    false_accepts: int


def match_events(predicted_times, truth_times, before=MATCH_BEFORE_S, after=MATCH_AFTER_S):
    """Greedy one-to-one matching of predictions to truth onsets.

    Both inputs are sorted times in seconds.  Each prediction matches the
    earliest unmatched truth whose window [t-before, t+after] contains it.
    """
    predicted = sorted(float(t) for t in predicted_times)
    truths = sorted(float(t) for t in truth_times)
    matched = [False] * len(truths)
    hits = 0
    for p in predicted:
        for i, t in enumerate(truths):
            if matched[i]:
                continue
            if t - before <= p <= t + after:
                matched[i] = True
                hits += 1
                break
            if t - before > p:
                break  # truths sorted; later ones start even further right
    return MatchResult(
        hits=hits, misses=len(truths) - hits, false_accepts=len(predicted) - hits
    )


@dataclass
class FrrFar:
    frr: float
    far_per_session: float
    far_per_hour: float


def compute_frr_far(misses, total_truths, false_accepts, n_negative_sessions, negative_hours):
    """Event-level rates from aggregate counts."""
    if total_truths <= 0:
        raise InvalidInputError("cannot compute FRR with zero true triggers")
    frr = misses / total_truths
    far_session = false_accepts / n_negative_sessions if n_negative_sessions else 0.0
    far_hour = false_accepts / negative_hours if negative_hours else 0.0
    return FrrFar(frr=frr, far_per_session=far_session, far_per_hour=far_hour)


@dataclass
class ScoredSession:
    """One session's policy outputs plus the truth needed for matching."""

    session_id: str
    intent: int
    n_ticks: int
    truth_onsets: np.ndarray  # seconds
    p_intended: np.ndarray | None = None  # per-tick scores (threshold policies)
    events: list | None = None  # fixed events (FSM operating point)
    challenge: str | None = None

    @property
    def duration_hours(self):
        return self.n_ticks / 10.0 / 3600.0

    def events_at(self, theta, cooldown=30):
        if self.p_intended is None:
            return self.events or []
        return decide_triggers(self.p_intended, theta, cooldown=cooldown)


def score_sessions(policy, fusion_inputs, metas):
    """Run a neural policy over cached [T, 6] inputs -> ScoredSessions.

    ``metas`` aligns with ``fusion_inputs``: dicts with session_id, intent,
    onsets, and optional challenge.
    """
    out = []
    for xs, meta in zip(fusion_inputs, metas):
        out.append(
            ScoredSession(
                session_id=meta["session_id"],
                intent=int(meta["intent"]),
                n_ticks=len(xs),
                truth_onsets=np.asarray(meta.get("onsets", ()), dtype=np.float64),
                p_intended=policy.score_sequence(xs),
                challenge=meta.get("challenge"),
            )
        )
    return out


def _aggregate(scored, theta, cooldown=30):
    """(frr, far_clipped, misses, fas) at one threshold."""
    misses = 0
    truths = 0
    fas = 0
    n_neg = 0
    for s in scored:
        events = s.events_at(theta, cooldown)
        result = match_events([e.onset_time for e in events], s.truth_onsets)
        misses += result.misses
        truths += len(s.truth_onsets)
        fas += result.false_accepts
        if s.intent == 0:
            n_neg += 1
    if truths == 0:
        raise InvalidInputError("score set contains no true triggers")
    if n_neg == 0:
        raise InvalidInputError("score set contains no negative sessions")
    frr = misses / truths
    far = min(1.0, fas / n_neg)
    return frr, far, misses, fas


@dataclass
class DetCurve:
    theta: np.ndarray
    frr: np.ndarray
    far: np.ndarray
    degenerate: bool = False

    def cleaned(self):
        """Monotone view: sorted by FAR ascending with FRR non-increasing
        (the lower-left envelope of the sampled operating points)."""
        order = np.argsort(self.far, kind="stable")
        far = self.far[order]
        frr = np.minimum.accumulate(self.frr[order])
        return DetCurve(self.theta[order], frr, far, self.degenerate)

    def to_csv(self, path):
        lines = ["theta,frr,far"]
        lines += [
            f"{t:.9g},{f:.9g},{a:.9g}"
            for t, f, a in zip(self.theta, self.frr, self.far)
        ]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def to_svg(self, path, title="DET curve"):
        write_det_svg(self, path, title=title)


def _interpolate_crossing(frr_lo, far_lo, frr_hi, far_hi):
    denom = (frr_hi - frr_lo) - (far_hi - far_lo)
    if denom == 0.0:
        return 0.5 * (frr_lo + far_lo)
    t = (far_lo - frr_lo) / denom
    t = min(1.0, max(0.0, t))
    return frr_lo + t * (frr_hi - frr_lo)


def _unique_scores(scored):
    vals = np.unique(np.concatenate([s.p_intended for s in scored]))
    return vals[(vals > 0.0) & (vals < 1.0)]


def _eer_exact(scored, cooldown):
    """Walk every achievable operating point in ascending theta order."""
    u = _unique_scores(scored)
    candidates = list(u)
    candidates.append((candidates[-1] + 1.0) / 2.0 if candidates else 0.5)
    prev = None
    for theta in candidates:
        frr, far, _, _ = _aggregate(scored, float(theta), cooldown)
        d = frr - far
        if prev is not None:
            p_theta, p_frr, p_far, p_d = prev
            if p_d <= 0.0 < d:
                return _interpolate_crossing(p_frr, p_far, frr, far), False
        else:
            if d == 0.0 and len(candidates) == 1:
                return frr, False
            if d > 0.0:
                # FRR already exceeds FAR at the lowest achievable point
                return 0.5 * (frr + far), True
        prev = (theta, frr, far, d)
    # sign never flipped: constant d <= 0 (or a single zero candidate)
    _, frr, far, d = prev
    return (frr, True) if d != 0.0 else (frr, False)


def _eer_refined(scored, grid, frrs, fars, cooldown, refine=True):
    d = frrs - fars
    if d[0] > 0.0:
        return 0.5 * (frrs[0] + fars[0]), True
    cross = np.nonzero((d[:-1] <= 0.0) & (d[1:] > 0.0))[0]
    if len(cross) == 0:
        zeros = np.nonzero(d == 0.0)[0]
        if len(zeros):
            # the curves meet exactly; report the best such meeting point
            i = int(zeros[np.argmin(np.maximum(frrs[zeros], fars[zeros]))])
            return float(frrs[i]), False
        i = int(np.argmin(np.abs(d)))
        return 0.5 * (frrs[i] + fars[i]), True
    i = int(cross[0])
    lo, hi = float(grid[i]), float(grid[i + 1])
    lo_vals, hi_vals = (frrs[i], fars[i]), (frrs[i + 1], fars[i + 1])
    # narrow the bracket onto the first step jump; each level scans
    # lazily and keeps the first sign change
    while refine and hi - lo > 1e-10 and lo_vals != hi_vals:
        prev_t, prev_vals = lo, lo_vals
        found = False
        for t in np.linspace(lo, hi, 34)[1:-1]:
            f, a, _, _ = _aggregate(scored, float(t), cooldown)
            if prev_vals[0] - prev_vals[1] <= 0.0 < f - a:
                lo, lo_vals = prev_t, prev_vals
                hi, hi_vals = float(t), (f, a)
                found = True
                break
            prev_t, prev_vals = float(t), (f, a)
        if not found:
            lo, lo_vals = prev_t, prev_vals
    return _interpolate_crossing(lo_vals[0], lo_vals[1], hi_vals[0], hi_vals[1]), False


def compute_det_eer(scored, n_grid=DEFAULT_THETA_GRID, cooldown=30, refine=True):
    """DET curve on a log-spaced threshold sweep plus the EER.

    Small score sets (<= EXACT_TICK_LIMIT total ticks) get the exact
    enumeration; larger ones refine the sweep's first crossing bracket
    unless ``refine=False`` (cheap mode for per-epoch model selection).
    Returns ``(DetCurve, eer)``; ``DetCurve.degenerate`` flags score sets
    where FRR and FAR never properly cross (e.g. constant scores).
    """
    for s in scored:
        if s.p_intended is None:
            raise InvalidInputError(
                f"{s.session_id}: DET sweep needs per-tick scores (FSM has a single point)"
            )
    grid = np.geomspace(1e-3, 1.0 - 1e-3, n_grid)
    frrs = np.empty(n_grid)
    fars = np.empty(n_grid)
    for i, theta in enumerate(grid):
        frrs[i], fars[i], _, _ = _aggregate(scored, float(theta), cooldown)

    total_ticks = sum(s.n_ticks for s in scored)
    if refine and total_ticks <= EXACT_TICK_LIMIT:
        eer, degenerate = _eer_exact(scored, cooldown)
    else:
        eer, degenerate = _eer_refined(scored, grid, frrs, fars, cooldown, refine=refine)
    # constant per-session traces carry no threshold information
    if all(len(np.unique(s.p_intended)) <= 1 for s in scored):
        degenerate = True
    return DetCurve(grid, frrs, fars, degenerate=degenerate), float(eer)


def fsm_operating_point(scored):
    """(FrrFar, comparison_number) for fixed-event (FSM) scored sessions."""
    misses = truths = fas = n_neg = 0
    neg_hours = 0.0
    for s in scored:
        events = s.events or []
        result = match_events([e.onset_time for e in events], s.truth_onsets)
        misses += result.misses
        truths += len(s.truth_onsets)
        fas += result.false_accepts
        if s.intent == 0:
            n_neg += 1
            neg_hours += s.duration_hours
    rates = compute_frr_far(misses, truths, fas, n_neg, neg_hours)
    comparison = 0.5 * (rates.frr + min(1.0, rates.far_per_session))
    return rates, comparison


def calibrate_threshold(scored_positives, target_frr=0.20, tol=0.01, cooldown=30):
    """Find theta whose event-level FRR on the given positives hits the target.

    Scans the achievable FRR steps (unique score values); raises
    NumericFailureError with the scanned curve attached when no step lands
    within ``target_frr +- tol``.
    """
    positives = [s for s in scored_positives if s.intent == 1]
    if not positives:
        raise InvalidInputError("calibration needs positive sessions")
    truths = sum(len(s.truth_onsets) for s in positives)
    u = _unique_scores(positives)
    if len(u) == 0:
        raise NumericFailureError("calibration infeasible: constant scores")
    candidates = np.concatenate([u, [(u[-1] + 1.0) / 2.0]])
    best = None
    curve = []
    for theta in candidates:
        misses = 0
        for s in positives:
            events = decide_triggers(s.p_intended, float(theta), cooldown=cooldown)
            misses += match_events([e.onset_time for e in events], s.truth_onsets).misses
        frr = misses / truths
        curve.append((float(theta), frr))
        gap = abs(frr - target_frr)
        if best is None or gap < best[0]:
            best = (gap, float(theta), frr)
        if frr > target_frr + tol and best[0] <= tol:
            break  # FRR is non-decreasing along the scan in practice
    gap, theta, frr = best
    if gap > tol:
        step = max(1, len(curve) // 8)
        dump = "; ".join(f"theta={t:.4g} frr={f:.3f}" for t, f in curve[::step])
        err = NumericFailureError(
            f"calibration infeasible: closest achievable FRR {frr:.4f} "
            f"vs target {target_frr:.2f} +- {tol:.2f}; curve: {dump}"
        )
        err.frr_curve = curve
        raise err
    return theta


def scenario_breakdown(scored_challenges, theta=None, cooldown=30):
    """False-accept counts per challenge tag at one operating point.

    Pass ``theta`` for threshold policies; FSM sessions carry their events.
    Sessions are all negative, so every predicted event is a false accept.
    The five standard tags always appear (zero count when absent).
    """
    from .sessions import CHALLENGE_TAGS

    counts = {tag: 0 for tag in CHALLENGE_TAGS}
    for s in scored_challenges:
        tag = s.challenge or "untagged"
        events = s.events_at(theta, cooldown) if theta is not None else (s.events or [])
        counts[tag] = counts.get(tag, 0) + len(events)
    return counts


# -- quantization round-trip check ---------------------------------------


def policy_eer(policy, fusion_inputs, metas, cooldown=30):
    scored = score_sessions(policy, fusion_inputs, metas)
    _, eer = compute_det_eer(scored, cooldown=cooldown)
    return eer


def quantized_eer_delta(policy_fp32, policy_fp16, fusion_inputs, metas, cooldown=30):
    """EER(fp16 dequantized) - EER(fp32) on identical cached inputs."""
    eer32 = policy_eer(policy_fp32, fusion_inputs, metas, cooldown)
    eer16 = policy_eer(policy_fp16, fusion_inputs, metas, cooldown)
    return eer16 - eer32, eer32, eer16


# -- runtime / memory benchmark ------------------------------------------


def host_descriptor():
    model = platform.processor() or "unknown"
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.lower().startswith("model name"):
                model = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {"cpu": model, "cores": os.cpu_count(), "platform": platform.platform()}


@dataclass
class BenchmarkResult:
    variant: str
    iterations: int
    mean_ms: float
    p95_ms: float
    latencies_ms: list
    peak_rss_mb: float
    host: dict = field(default_factory=host_descriptor)


class _FsmStreamRunner:
    """Streaming smoothing buffers + FSM state for the benchmark loop."""

    def __init__(self, policy):
        self.policy = policy
        self.g_hist = []
        self.s_hist = []
        self.state = policy.new_state()

    def step(self, gesture_logits, speech_logits):
        g = softmax(gesture_logits)
        s = softmax(speech_logits)[1]
        self.g_hist.append(g)
        self.s_hist.append(s)
        cfg = self.policy.config
        g_sm = np.mean(self.g_hist[-cfg.s_gesture :], axis=0)
        s_sm = float(np.mean(self.s_hist[-cfg.s_speech :]))
        self.state, event = self.policy.step(self.state, g_sm, s_sm)
        return event


def benchmark_pipeline(speech_detector, gesture_detector, policy,
                       iterations=30, warmup=5, seed=0, variant=""):
    """Wall-clock per-tick latency of the full pipeline.

    One iteration is a complete decision tick: mel block + gesture
    features, both detector streaming steps, and the fusion step.  Runs
    single-threaded in-process; memory is the process peak RSS.
    """
    from .detectors import DetectorState

    rng = np.random.default_rng(seed)
    total = iterations + warmup
    audio_windows = rng.normal(scale=0.05, size=(total, 1840)).astype(np.float32)
    accel_windows = rng.normal(scale=0.1, size=(total, 100, 3)).astype(np.float32)

    speech_state = DetectorState(speech_detector)
    gesture_state = DetectorState(gesture_detector)
    if isinstance(policy, FsmPolicy):
        fsm_runner = _FsmStreamRunner(policy)
        h = None
    else:
        fsm_runner = None
        h = policy.initial_state()

    latencies = []
    for i in range(total):
        t0 = time.perf_counter()
        mel, _ = mel_featurize(audio_windows[i])  # exactly 10 frames
        block = mel.reshape(-1)
        gfeat = gesture_featurize(accel_windows[i])
        s_logits = speech_state.step(block, timestamp=i * 0.1)
        g_logits = gesture_state.step(gfeat, timestamp=i * 0.1)
        if fsm_runner is not None:
            fsm_runner.step(g_logits, s_logits)
        else:
            x = align_and_merge(g_logits[None], s_logits[None], policy.fusion_type)[0]
            _, h = policy.step(x, h)
        t1 = time.perf_counter()
        if i >= warmup:
            latencies.append((t1 - t0) * 1000.0)

    peak_rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return BenchmarkResult(
        variant=variant,
        iterations=iterations,
        mean_ms=float(np.mean(latencies)),
        p95_ms=float(np.percentile(latencies, 95)),
        latencies_ms=[float(v) for v in latencies],
        peak_rss_mb=peak_rss_kb / 1024.0,
    )


# -- SVG output ------------------------------------------------------------


def write_det_svg(curve, path, title="DET curve", size=480, margin=56):
    """Self-contained SVG of FRR vs FAR with the samples embedded as a comment."""
    inner = size - 2 * margin

    def sx(v):
        return margin + v * inner

    def sy(v):
        return size - margin - v * inner

    pts = " ".join(
        f"{sx(a):.2f},{sy(f):.2f}" for a, f in zip(curve.far, curve.frr)
    )
    ticks = [0.0, 0.25, 0.5, 0.75, 1.0]
    tick_lines = []
    for v in ticks:
        tick_lines.append(
            f'<line x1="{sx(v):.1f}" y1="{size-margin}" x2="{sx(v):.1f}" '
            f'y2="{size-margin+5}" stroke="black"/>'
            f'<text x="{sx(v):.1f}" y="{size-margin+18}" font-size="10" '
            f'text-anchor="middle">{v:g}</text>'
            f'<line x1="{margin-5}" y1="{sy(v):.1f}" x2="{margin}" '
            f'y2="{sy(v):.1f}" stroke="black"/>'
            f'<text x="{margin-8}" y="{sy(v)+3:.1f}" font-size="10" '
            f'text-anchor="end">{v:g}</text>'
        )
    data_comment = "\n".join(
        f"{t:.9g},{f:.9g},{a:.9g}" for t, f, a in zip(curve.theta, curve.frr, curve.far)
    )
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">
<!-- data: theta,frr,far
{data_comment}
-->
<rect width="{size}" height="{size}" fill="white"/>
<text x="{size/2}" y="{margin/2}" font-size="14" text-anchor="middle">{title}</text>
<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" fill="none" stroke="black"/>
<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" stroke="#bbbbbb" stroke-dasharray="4 4"/>
{''.join(tick_lines)}
<text x="{size/2}" y="{size-12}" font-size="12" text-anchor="middle">false accepts per negative session (clipped)</text>
<text x="14" y="{size/2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {size/2})">false reject rate</text>
<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="1.5"/>
</svg>
"""
    Path(path).write_text(svg, encoding="utf-8")
