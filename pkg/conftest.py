"""
Pytest configuration and fixtures.
"""
import os

import numpy as np
import pytest

# Set Django settings module
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'qnee_project.settings')


@pytest.fixture
def rng():
    """Seeded numpy generator."""
    return np.random.default_rng(20240601)


@pytest.fixture
def random_rho(rng):
    """Factory for random full-rank (or given rank) density matrices."""
    from quantum.states import random_density_matrix

    def make(n_qubits, rank=None):
        return random_density_matrix(n_qubits, rank=rank, seed=rng)

    return make


@pytest.fixture
def diag_rho():
    """diag(0.9, 0.1, 0, 0), the standard two-qubit test state."""
    from quantum.states import DensityMatrix

    return DensityMatrix.from_diagonal([0.9, 0.1, 0.0, 0.0])


@pytest.fixture
def fast_train_config():
    """Aggressive optimizer settings for a small network."""
    from estimator.training import TrainConfig

    return TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=2000, test_eval_period=10, seed=7)


@pytest.fixture
def noise_free_config():
    """QNEE configuration with the analytic inner minimum."""
    from estimator.hybrid import QneeConfig

    return QneeConfig(n_layers=2, n_outer=3, fd_scheme='central', noise_free=True, n_trials=1, seed=11)


@pytest.fixture
def output_dir(tmp_path, settings):
    """Temporary run directory, also used as the default output directory."""
    path = tmp_path / 'runs'
    settings.QNEE_DEFAULTS = {**settings.QNEE_DEFAULTS, 'output_dir': str(path)}
    return path
