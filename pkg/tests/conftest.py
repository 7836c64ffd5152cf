#!/usr/bin/env python
"""
Pytest configuration and fixtures.
"""
import os
import sys

import pytest

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from genprior.app import app as lab_app  # noqa: E402
from genprior.measures import PointCloud, sample_benchmark  # noqa: E402
from genprior.transport import TrainConfig  # noqa: E402


@pytest.fixture
def flask_test_client():
    """Fixture for Flask test client."""
    lab_app.config['TESTING'] = True
    with lab_app.test_client() as client:
        yield client


@pytest.fixture
def gaussian_clouds():
    """Two independent 64-point standard Gaussian clouds in 2D."""
    return sample_benchmark("gaussian", 64, 1), sample_benchmark("gaussian", 64, 2)


@pytest.fixture
def diracs():
    return PointCloud.uniform([[0.0, 0.0]]), PointCloud.uniform([[3.0, 4.0]])


@pytest.fixture(scope="session")
def tiny_darcy_generator(tmp_path_factory):
    """A Darcy field generator on an 8x8 grid with a 4-dimensional latent space."""
    from genprior.experiments import train_darcy_prior

    cfg = TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, stage_count=1, hidden_widths=(16,),
                      epsilon_schedule=(20.0, 2.0), optimizer="adam", eval_size=64)
    path = tmp_path_factory.mktemp("generator") / "prior.gprm"
    stack, path = train_darcy_prior(path, n=64, m=8, latent_dim=4, cfg=cfg, seed=3)
    return stack, path
