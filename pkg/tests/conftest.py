import numpy as np
import pytest

from movelets import (
    apply_transform,
    calibration_segments,
    estimate_transform,
    make_corpus,
)


@pytest.fixture(scope="session")
def corpus4():
    """Four synthetic subjects with distinct device rotations and biases."""
    return make_corpus(4, 11)


@pytest.fixture(scope="session")
def normalized4(corpus4):
    """The same subjects normalized via their own labeled calibration runs."""
    out = []
    for s in corpus4:
        standing, lying = calibration_segments(s.timeline)
        transform = estimate_transform(s.raw, standing, lying)
        out.append((apply_transform(s.raw, transform), s.timeline, s.config.subject_id))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0)
