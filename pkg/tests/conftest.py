"""Shared fixtures for the eFGM test suite."""

import numpy as np
import pytest

from efgm.study import reference_model_d10


@pytest.fixture
def rng():
    """Fixed-seed generator for property checks."""
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def study_model():
    """Ten-dimensional model of the estimation study."""
    return reference_model_d10()
