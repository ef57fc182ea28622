"""Shared fixtures: a tiny corpus and trained artifacts reused across modules."""

import numpy as np
import pytest

from rtsfuse.sessions import Corpus
from rtsfuse.synthgen import GeneratorConfig, generate_corpus
from rtsfuse.training import FeatureCache, TrainConfig, score_corpus, train_detector


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    config = GeneratorConfig(
        n_subjects=12, sessions_per_subject=6, seed=1234, duration_range=(8.0, 10.0)
    )
    generate_corpus(config, out)
    return out


@pytest.fixture(scope="session")
def tiny_fcache(tiny_corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("features")
    return FeatureCache.build(Corpus(tiny_corpus_dir), out)


@pytest.fixture(scope="session")
def tiny_detectors(tiny_fcache):
    config = TrainConfig(epochs=3, seed=7)
    speech, speech_hist = train_detector("speech", tiny_fcache, config=config)
    gesture, gesture_hist = train_detector("gesture", tiny_fcache, config=config)
    return {
        "speech": speech,
        "gesture": gesture,
        "speech_history": speech_hist,
        "gesture_history": gesture_hist,
    }


@pytest.fixture(scope="session")
def tiny_caches(tiny_detectors, tiny_fcache, tmp_path_factory):
    out = tmp_path_factory.mktemp("scores")
    softmax_cache = score_corpus(
        tiny_detectors["speech"], tiny_detectors["gesture"], tiny_fcache,
        "softmax", out / "softmax",
    )
    logit_cache = score_corpus(
        tiny_detectors["speech"], tiny_detectors["gesture"], tiny_fcache,
        "logit", out / "logit",
    )
    return {"softmax": softmax_cache, "logit": logit_cache}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)
