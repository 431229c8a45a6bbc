import numpy as np
import pytest

from jointrack.model import Correspondence
from jointrack.potentials import (
    LogisticModel,
    SpatialModel,
    fit_offsets,
    label_detections,
    spatial_training_samples,
)
from jointrack.synth import SynthConfig, generate
from jointrack.tracker import Models


def clean_temporal_model():
    """Favours overlapping matches and short moves."""
    weights = np.zeros(10)
    weights[0] = 2.0
    weights[4] = -8.0
    return LogisticModel(tuple(weights), bias=3.0)


def clean_spatial_model(scene, joint_count=14):
    """Offsets from labelled pairs; the logistic part only reads the offset deviation."""
    labels = label_detections(scene.detections, scene.annotations)
    pairs = spatial_training_samples(scene.detections, labels)
    offsets = fit_offsets([(a, b) for a, b, label in pairs if label])
    shell = SpatialModel(joint_count, offsets)
    weights = np.zeros(shell.feature_dim)
    weights[3] = -10.0
    return SpatialModel(joint_count, offsets, LogisticModel(tuple(weights), bias=4.0))


def static_correspondence(frame_a, frame_b, width=800, height=400, step=10):
    points = tuple((float(x), float(y)) for y in range(0, height, step) for x in range(0, width, step))
    return Correspondence(frame_a, frame_b, points, points)


@pytest.fixture(scope="module")
def clean_scene():
    return generate(SynthConfig(seed=0, persons=2, frames=8))


@pytest.fixture
def temporal_model():
    return clean_temporal_model()


@pytest.fixture
def correspondence_factory():
    return static_correspondence


@pytest.fixture(scope="module")
def clean_models(clean_scene):
    return Models(temporal=clean_temporal_model(), spatial=clean_spatial_model(clean_scene))


@pytest.fixture
def models_for():
    """Clean models fitted to a given scene."""

    def build(scene):
        return Models(temporal=clean_temporal_model(), spatial=clean_spatial_model(scene))

    return build
