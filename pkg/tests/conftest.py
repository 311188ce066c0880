"""Shared helpers: tiny network geometries sized for fast CPU tests."""

import numpy as np
import pytest

from lexigan.latent import LatentSpec
from lexigan.models import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_model(n_layers: int = 2, model_dim: int = 4, seed_len: int = 4) -> ModelConfig:
    """Smallest geometry the stride chain allows: 4 * 4**n samples."""
    return ModelConfig(
        slice_len=seed_len * 4**n_layers,
        model_dim=model_dim,
        n_layers=n_layers,
        seed_len=seed_len,
        kernel=9,
        stride=4,
    )


def tiny_spec(kind: str = "one_hot", size: int = 4, noise_dim: int = 6) -> LatentSpec:
    return LatentSpec(kind=kind, size=size, noise_dim=noise_dim)
