import json

import numpy as np
import pytest

from scardo.config import settings
from scardo.services.attribute_space import build_space
from scardo.services.ranking import validate_ranking
from scardo.services.transition import (
    build_opinion_tensor,
    lift_opinion_tensor,
    mask_static_attributes,
)

# Opinion {-1, 1} x age {a, b}; rows and columns ordered z_1..z_4.
EXAMPLE_RANKING = [
    [1.0, 0.8, 0.6, 0.4],
    [0.8, 1.0, 0.4, 0.6],
    [0.6, 0.4, 1.0, 0.8],
    [0.4, 0.6, 0.8, 1.0],
]


@pytest.fixture
def example_space():
    """Return the two-opinion, two-age space with labeled values."""
    return build_space([2, 2], labels=[[-1, 1], ["a", "b"]])


@pytest.fixture
def example_ranking(example_space):
    """Return the 4 x 4 ranking matrix where shared attributes raise f."""
    return validate_ranking(example_space, EXAMPLE_RANKING)


@pytest.fixture
def adoption_tensor(example_space):
    """Return the lifted 'adopt the donor opinion with probability 0.4' tensor, age static."""
    base = build_opinion_tensor(2, "voter", mu=0.4)
    return mask_static_attributes(lift_opinion_tensor(example_space, base), [2])


@pytest.fixture
def example_config():
    """Return the Monte-Carlo vs mean-field experiment as a config dict."""
    return {
        "space": {"cardinalities": [2, 2], "labels": [[-1, 1], ["a", "b"]]},
        "tensor": {
            "kind": "recipe",
            "base": {"kind": "voter", "mu": 0.4},
            "static_attributes": [2],
        },
        "ranking": {"kind": "dense", "entries": EXAMPLE_RANKING},
        "population": {"size": 200, "initial_counts": [80, 20, 20, 80]},
        "run": {"seed": 11, "horizon": 2.0, "step": 0.01, "ode_sample_interval": 0.1},
        "output": {"prefix": "example"},
    }


@pytest.fixture
def config_file(tmp_path, example_config):
    """Write the example config to a temporary file and return its path."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps(example_config), encoding="utf-8")
    return path


@pytest.fixture
def mock_settings(monkeypatch):
    """Return settings with parallel replicas off and debug checks on."""
    monkeypatch.setattr(settings, "MAX_WORKERS", 1)
    monkeypatch.setattr(settings, "DEBUG", True)
    return settings


def random_stochastic(rng, shape):
    """Random nonnegative array whose last axis sums to 1 (some zeros)."""
    raw = rng.random(shape) * (rng.random(shape) < 0.7)
    raw[..., 0] += 1e-3
    return raw / raw.sum(axis=-1, keepdims=True)


def random_simplex(rng, size):
    point = rng.random(size)
    return point / point.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
