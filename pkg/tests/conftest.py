"""Pytest configuration and fixtures."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.core.learning.training import TrainConfig
from app.main import app
from app.models.experiment import (
    DatasetConfig,
    ExperimentConfig,
    PhysicalConfig,
    ScenarioConfig,
)


@pytest.fixture
def client() -> TestClient:
    """Create test client for FastAPI application."""
    return TestClient(app)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_config() -> ExperimentConfig:
    """3x3 APs, 4 UEs, a handful of locations and a tiny network: runs in well under a second."""
    return ExperimentConfig(
        seed=11,
        physical=PhysicalConfig(tau_p=4),
        scenario=ScenarioConfig(grid_side=3, num_ues=4),
        dataset=DatasetConfig(train_locations=3, test_locations=5),
        training=TrainConfig(
            epochs=2,
            batch_size=4,
            learning_rate=1e-3,
            hidden_size=8,
            fc_hidden=[8],
            checkpoint_every=1,
        ),
    )


@pytest.fixture
def small_config_file(tmp_path, small_config):
    """The small configuration written as TOML."""
    p = small_config.physical
    s = small_config.scenario
    d = small_config.dataset
    t = small_config.training
    path = tmp_path / "small.toml"
    path.write_text(
        f"""seed = {small_config.seed}

[physical]
tau_p = {p.tau_p}

[scenario]
grid_side = {s.grid_side}
num_ues = {s.num_ues}

[dataset]
train_locations = {d.train_locations}
test_locations = {d.test_locations}

[training]
epochs = {t.epochs}
batch_size = {t.batch_size}
learning_rate = {t.learning_rate}
hidden_size = {t.hidden_size}
fc_hidden = {t.fc_hidden}
checkpoint_every = {t.checkpoint_every}
""",
        encoding="utf-8",
    )
    return path
