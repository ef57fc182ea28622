"""Per-tick pipeline latency: FSM baseline versus the neural policy.

One benchmark iteration is a full decision tick: mel block + gesture
features, both detector streaming steps, and the fusion step.  Mirrors the
(a)-vs-(f) comparison: shallow detectors + FSM against a 5-layer speech
detector + GRU policy.
"""

import numpy as np

from rtsfuse.detectors import Detector, DetectorConfig
from rtsfuse.evaluation import benchmark_pipeline
from rtsfuse.fusion import FsmPolicy, NeuralPolicy

rng = np.random.default_rng(0)

variants = {
    "a (1-layer detectors + FSM)": (
        Detector(DetectorConfig("speech", n_conv_layers=1), rng=rng),
        Detector(DetectorConfig("gesture", n_conv_layers=1), rng=rng),
        FsmPolicy(),
    ),
    "f (5-layer speech + GRU h=64)": (
        Detector(DetectorConfig("speech", n_conv_layers=5), rng=rng),
        Detector(DetectorConfig("gesture", n_conv_layers=1), rng=rng),
        NeuralPolicy("logit", 64, rng=rng),
    ),
}

results = {}
for name, (speech, gesture, policy) in variants.items():
    r = benchmark_pipeline(speech, gesture, policy, iterations=30, seed=1, variant=name)
    results[name] = r
    print(f"{name}:")
    print(f"  mean {r.mean_ms:.3f} ms, p95 {r.p95_ms:.3f} ms over {r.iterations} iterations")
    print(f"  peak RSS {r.peak_rss_mb:.1f} MB")

a, f = results.values()
print(f"\nhost: {a.host['cpu']} ({a.host['cores']} cores)")
print(f"neural/FSM latency ratio: {f.mean_ms / a.mean_ms:.2f}x "
      "(absolute numbers are host-dependent; only the direction is meaningful)")
