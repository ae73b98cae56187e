import numpy as np
import pytest

from noisesearch.flow import MixtureModel


@pytest.fixture
def mixture2():
    """Smooth, well-separated 2-component mixture in 4 dimensions."""
    d = 4
    means = np.stack([np.full(d, 1.0), np.full(d, -1.0)])
    variances = np.full((2, d), 0.5)
    weights = np.array([0.5, 0.5])
    return MixtureModel(means, variances, weights, ("a", "b"))


@pytest.fixture
def mixture1():
    """Single-component mixture (conditional == unconditional)."""
    d = 3
    return MixtureModel(
        np.full((1, d), 2.0), np.full((1, d), 0.25), np.array([1.0]), ("only",)
    )
