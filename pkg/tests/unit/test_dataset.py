"""Tests for seeded dataset generation."""

import json

import numpy as np
import pytest

from app.core.exceptions import ConfigError
from app.models.experiment import DatasetConfig, ExperimentConfig
from app.services.dataset import Dataset, generate_dataset


class TestGenerateDataset:
    """Test cases for train/test location sets."""

    def test_sizes(self, small_config):
        dataset = generate_dataset(small_config)

        assert len(dataset.train_drops) == 3
        assert len(dataset.test_locations) == 5
        assert dataset.scenario.num_aps == 9
        assert dataset.test_locations[0].shadow_db.shape == (9, 4)

    def test_default_counts_are_distinct(self):
        config = ExperimentConfig(dataset=DatasetConfig(train_locations=1000, test_locations=200))

        dataset = generate_dataset(config)

        drops = [d.ue_positions for d in dataset.train_drops]
        drops += [t.drop.ue_positions for t in dataset.test_locations]
        assert len(drops) == 1200
        assert len({d.tobytes() for d in drops}) == 1200

    def test_same_seed_same_dataset(self, small_config):
        first = generate_dataset(small_config)
        second = generate_dataset(small_config)

        assert first.to_record() == second.to_record()

    def test_different_seed_different_dataset(self, small_config):
        first = generate_dataset(small_config)
        second = generate_dataset(small_config.with_seed(small_config.seed + 1))

        assert not np.array_equal(
            first.train_drops[0].ue_positions, second.train_drops[0].ue_positions
        )

    def test_test_set_independent_of_train_size(self, small_config):
        small = generate_dataset(small_config, train_locations=1)
        large = generate_dataset(small_config, train_locations=50)

        np.testing.assert_array_equal(
            small.test_locations[2].shadow_db, large.test_locations[2].shadow_db
        )
        np.testing.assert_array_equal(
            small.scenario.ap_positions, large.scenario.ap_positions
        )

    def test_save_and_load(self, tmp_path, small_config):
        dataset = generate_dataset(small_config)

        restored = Dataset.load(dataset.save(tmp_path / "dataset.json"))

        assert restored.to_record() == dataset.to_record()
        beta = restored.test_locations[0].realization(restored.scenario, 2.0).beta
        assert beta.shape == (9, 4)

    def test_saved_file_records_provenance(self, tmp_path, small_config):
        path = generate_dataset(small_config).save(tmp_path / "dataset.json")

        stored = json.loads(path.read_text(encoding="utf-8"))

        assert stored["config_hash"] == small_config.config_hash()
        assert stored["seed"] == small_config.seed
        assert Dataset.load(path).config_hash == small_config.config_hash()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            Dataset.load(tmp_path / "absent.json")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "dataset.json"
        path.write_text('{"seed": 1, "scenario": {}}', encoding="utf-8")

        with pytest.raises(ConfigError, match="invalid dataset file"):
            Dataset.load(path)
