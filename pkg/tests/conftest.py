import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lecsum import ingest, pipeline, synth

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def deck():
    return synth.slide_deck()


@pytest.fixture(scope="session")
def deck_result(deck):
    frames = ingest.FrameSequence.from_frames(deck["frames"], deck["end_s"])
    return pipeline.summarize_frames(frames, segment_id="deck")


@pytest.fixture(scope="session")
def fig1():
    return synth.fig1_segment()


@pytest.fixture(scope="session")
def fig1_result(fig1):
    frames = ingest.FrameSequence.from_frames(fig1["samples"], fig1["end_s"])
    return pipeline.summarize_frames(frames, segment_id="fig1")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
