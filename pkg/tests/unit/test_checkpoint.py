"""Tests for policy checkpoints."""

import numpy as np
import pytest

from app.core.exceptions import CheckpointMismatchError
from app.core.learning.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.core.learning.policy import FeatureNormalizer, PolicyParams


@pytest.fixture
def checkpoint(rng) -> Checkpoint:
    params = PolicyParams.initialize(5, 4, rng, fc_hidden=(6, 3))
    normalizer = FeatureNormalizer(rng.normal(-100, 5, 4), rng.uniform(1, 3, 4), 700.0)
    return Checkpoint(params, normalizer, {"master_seed": 7, "epoch": 3})


class TestCheckpoint:
    """Test cases for saving and loading checkpoints."""

    def test_round_trip(self, tmp_path, checkpoint):
        path = save_checkpoint(tmp_path / "nested" / "policy.npz", checkpoint)

        loaded = load_checkpoint(path, expected_aps=4)

        assert loaded.params.hidden_size == 5
        assert loaded.params.fc_hidden == (6, 3)
        for name, tensor in checkpoint.params.tensors.items():
            np.testing.assert_array_equal(loaded.params[name], tensor)
        np.testing.assert_array_equal(loaded.normalizer.std_db, checkpoint.normalizer.std_db)
        assert loaded.lineage == {"master_seed": 7, "epoch": 3}

    def test_identical_files_for_identical_content(self, tmp_path, checkpoint):
        first = save_checkpoint(tmp_path / "a.npz", checkpoint)
        second = save_checkpoint(tmp_path / "b.npz", checkpoint)

        assert first.read_bytes() == second.read_bytes()

    def test_ap_count_mismatch(self, tmp_path, checkpoint):
        path = save_checkpoint(tmp_path / "policy.npz", checkpoint)

        with pytest.raises(CheckpointMismatchError, match="L=4"):
            load_checkpoint(path, expected_aps=25)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointMismatchError, match="not found"):
            load_checkpoint(tmp_path / "absent.npz")

    def test_foreign_archive(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, weights=np.zeros(3))

        with pytest.raises(CheckpointMismatchError, match="not a policy checkpoint"):
            load_checkpoint(path)
