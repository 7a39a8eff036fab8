"""Python access to the mobsynth pipeline and its metric kernels."""

import json

from ._core import (
    ConfigError,
    DomainError,
    FormatError,
    MetricError,
    TrainingError,
    VocabularyError,
    __version__,
    chi_squared_sf,
    delta_cutoff,
    edit_distance,
    generate,
    haversine_km,
    kl_divergence,
    min_dist,
)
from . import _core

STAGES = (
    "simulate",
    "ingest",
    "build",
    "train",
    "generate",
    "eval-utility",
    "eval-privacy",
    "export-plots",
)


def default_config():
    return json.loads(_core.default_config())


def _merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def make_config(**overrides):
    """Default config with nested dict overrides, e.g. make_config(train={"epochs": 2})."""
    return _merge(default_config(), overrides)


def run_stage(stage, config):
    return json.loads(_core.run_stage(stage, json.dumps(config)))


def run_pipeline(config):
    return json.loads(_core.run_pipeline(json.dumps(config)))


def gradient_check(model_config, train_mode=False):
    return dict(_core.gradient_check(json.dumps(model_config), train_mode))


def train(sequences, model_config, epochs, checkpoint, batch_size=128, learning_rate=1e-3, seed=0):
    return _core.train(
        sequences,
        json.dumps(model_config),
        epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        seed=seed,
        checkpoint=str(checkpoint),
    )
