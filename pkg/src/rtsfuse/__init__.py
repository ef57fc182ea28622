"""Streaming multimodal raise-to-speak trigger detection.

A self-contained numpy/scipy engine: audio and wrist-motion featurizers on
a shared 10 Hz decision grid, streaming 1-D CNN speech/gesture detectors,
a GRU fusion policy (softmax or logit variant) plus a hand-designed FSM
baseline, a deterministic synthetic labeled corpus, sequential training,
and event-level FRR/FAR/EER evaluation with benchmarking.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    checkpoint,
    detectors,
    errors,
    evaluation,
    features,
    fusion,
    nn,
    sessions,
    synthgen,
    training,
)
