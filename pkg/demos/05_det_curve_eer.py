"""Event-level DET curve and equal error rate on synthetic score sets.

Builds score sets of varying quality, sweeps the decision threshold, and
writes a DET curve as CSV and a self-contained SVG.
"""

import tempfile
from pathlib import Path

import numpy as np

from rtsfuse.evaluation import ScoredSession, compute_det_eer, match_events

rng = np.random.default_rng(11)


def make_scored(quality):
    """quality in [0,1]: 1 = perfect confidences, 0 = uninformative."""
    scored = []
    for i in range(120):
        n_ticks = int(rng.integers(90, 160))
        intent = i % 2
        onsets = np.array([rng.uniform(3.0, n_ticks / 10 - 3.5)]) if intent else np.zeros(0)
        p = np.zeros(n_ticks)
        if intent:
            height = np.clip(quality + (1 - quality) * rng.uniform(0, 1), 0, 0.999)
            t0 = int(onsets[0] * 10)
            p[t0 : t0 + 5] = height
        else:
            height = np.clip((1 - quality) * rng.uniform(0, 1), 0, 0.999)
            t0 = int(rng.integers(5, n_ticks - 10))
            p[t0 : t0 + 5] = height
        scored.append(ScoredSession(f"s{i}", intent, n_ticks, onsets, p_intended=p))
    return scored


print("event matching example: prediction 0.3s early and 1.5s late both count")
print(" ", match_events([3.7, 20.0], [4.0, 18.5]))

out = Path(tempfile.mkdtemp(prefix="rtsfuse_demo_"))
for quality in (1.0, 0.7, 0.0):
    scored = make_scored(quality)
    curve, eer = compute_det_eer(scored)
    tag = f"quality {quality:.1f}"
    print(f"{tag}: EER = {eer:.3f}" + ("  (degenerate)" if curve.degenerate else ""))
    curve.to_csv(out / f"det_q{quality:.1f}.csv")
    curve.to_svg(out / f"det_q{quality:.1f}.svg", title=f"DET, {tag}")
print(f"curves written to {out}")
