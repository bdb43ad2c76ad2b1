"""End-to-end tests of the experiment service: dataset, evaluation, training, export."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import CheckpointMismatchError, ParameterError
from app.core.learning.checkpoint import Checkpoint, load_checkpoint
from app.core.learning.policy import FeatureNormalizer, PolicyParams
from app.models.experiment import (
    DatasetConfig,
    ExperimentConfig,
    PhysicalConfig,
    load_experiment_config,
)
from app.models.reports import ClusteringMethod
from app.services.experiment_service import ExperimentService
from app.services.report_writer import read_connection_map, read_frame, read_pilot_records


def _default_setup(tau_p: int, test_locations: int = 20) -> ExperimentConfig:
    return ExperimentConfig(
        physical=PhysicalConfig(tau_p=tau_p),
        dataset=DatasetConfig(train_locations=1, test_locations=test_locations),
    )


class TestBaselineEvaluation:
    """Connection counts of the pilot-based heuristic on the default setup."""

    def test_orthogonal_pilots_connect_every_pair(self):
        report = ExperimentService(_default_setup(tau_p=10)).evaluate(ClusteringMethod.BASELINE)

        assert all(r.connections == 250 for r in report.records)

    def test_three_pilots_give_three_links_per_ap(self):
        report = ExperimentService(_default_setup(tau_p=3)).evaluate(ClusteringMethod.BASELINE)

        assert all(75 <= r.connections <= 85 for r in report.records)
        assert report.mean_connections < 80

    @pytest.mark.parametrize("tau_p, reference", [(3, 24.42), (10, 24.65)])
    def test_mean_se_sum_matches_reference(self, tau_p, reference):
        """200 locations land within 15% of the reference heuristic SE sums."""
        report = ExperimentService(_default_setup(tau_p, test_locations=200)).evaluate(
            ClusteringMethod.BASELINE
        )

        assert len(report.records) == 200
        assert report.mean_se_sum == pytest.approx(reference, rel=0.15)

    def test_reference_methods(self):
        service = ExperimentService(_default_setup(tau_p=10, test_locations=5))

        master_only = service.evaluate(ClusteringMethod.MASTER_ONLY)
        full = service.evaluate(ClusteringMethod.FULL)

        assert all(r.connections == 10 for r in master_only.records)
        assert all(r.connections == 250 for r in full.records)
        assert full.mean_objective == pytest.approx(full.mean_se_sum - 250 * 0.04)
        assert master_only.mean_objective == pytest.approx(master_only.mean_se_sum - 10 * 0.04)

    def test_reports_are_paired_across_methods(self):
        service = ExperimentService(_default_setup(tau_p=10, test_locations=5))

        baseline = service.evaluate(ClusteringMethod.BASELINE)
        full = service.evaluate(ClusteringMethod.FULL)

        # with orthogonal pilots the heuristic is the full clustering
        assert [r.se_sum for r in baseline.records] == [r.se_sum for r in full.records]


class TestPolicyEvaluation:
    """Checkpoint-driven evaluation."""

    def test_zero_policy_is_master_only(self, small_config):
        service = ExperimentService(small_config)
        num_aps = service.dataset().scenario.num_aps
        checkpoint = Checkpoint(
            PolicyParams.zeros(4, num_aps, fc_hidden=(4,)),
            FeatureNormalizer.identity(num_aps, 700.0),
        )

        report = service.evaluate(ClusteringMethod.POLICY, checkpoint=checkpoint)

        assert all(r.connections == small_config.scenario.num_ues for r in report.records)

    def test_wrong_ap_count_rejected(self, small_config):
        service = ExperimentService(small_config)
        checkpoint = Checkpoint(
            PolicyParams.zeros(4, 25, fc_hidden=(4,)), FeatureNormalizer.identity(25, 700.0)
        )

        with pytest.raises(CheckpointMismatchError):
            service.evaluate(ClusteringMethod.POLICY, checkpoint=checkpoint)

    def test_policy_needs_checkpoint(self, tmp_path, small_config):
        with pytest.raises(ParameterError):
            ExperimentService(small_config).evaluate_to_dir(ClusteringMethod.POLICY, tmp_path)


class TestTrainingPipeline:
    """Training writes checkpoints and history, and reruns reproduce them."""

    def test_train_then_evaluate(self, tmp_path, small_config):
        service = ExperimentService(small_config)

        checkpoint, history, final_path = service.train(tmp_path)

        assert len(history) == small_config.training.epochs
        assert (tmp_path / "checkpoint_epoch0001.npz").exists()
        assert (tmp_path / "checkpoint_epoch0002.npz").exists()
        assert len(read_frame(tmp_path / "history.csv")) == small_config.training.epochs
        loaded = load_checkpoint(final_path, expected_aps=9)
        assert loaded.lineage["epoch"] == small_config.training.epochs

        report, paths = service.evaluate_to_dir(ClusteringMethod.POLICY, tmp_path, final_path)
        assert len(report.records) == small_config.dataset.test_locations
        assert paths["records"].name == "policy_report.csv"

    def test_reruns_are_bitwise_identical(self, tmp_path, small_config):
        for run in ("a", "b"):
            service = ExperimentService(small_config)
            _, _, final_path = service.train(tmp_path / run)
            service.evaluate_to_dir(ClusteringMethod.POLICY, tmp_path / run, final_path)

        for name in ("history.csv", "checkpoint_final.npz", "policy_report.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestConnectionMap:
    """Connection map export."""

    def test_three_pilot_map(self, tmp_path):
        service = ExperimentService(_default_setup(tau_p=3, test_locations=3))

        path, clusters = service.export_connection_map(
            0, ClusteringMethod.BASELINE, tmp_path / "map.txt"
        )

        aps, ues, links = read_connection_map(path)
        assert aps.shape == (25, 2)
        assert ues.shape == (10, 2)
        assert len(links) == clusters.connections
        assert 75 <= len(links) <= 85
        assert {ue for _, ue in links} == set(range(10))
        assert links == clusters.links()
        pilots = read_pilot_records(path)
        assert [p["ue"] for p in pilots] == list(range(10))
        assert {p["pilot"] for p in pilots} == {0, 1, 2}

    def test_location_out_of_range(self, tmp_path, small_config):
        with pytest.raises(ParameterError):
            ExperimentService(small_config).export_connection_map(
                99, ClusteringMethod.BASELINE, tmp_path / "map.txt"
            )


class TestValidation:
    def test_checks_pass(self, small_config):
        report = ExperimentService(small_config).validate(trials=100_000)

        assert report.mc_max_relative_error < 0.02
        assert report.gradient_max_relative_error <= 1e-4
        assert report.passed

    def test_describe_dataset(self, small_config):
        description = ExperimentService(small_config).describe_dataset()

        assert description["num_aps"] == 9
        assert description["test_locations"] == 5
        assert description["config_hash"] == small_config.config_hash()


class TestSavedDataset:
    """Evaluating on a dataset loaded from disk."""

    def test_loaded_dataset_reproduces_reports(self, tmp_path, small_config):
        fresh = ExperimentService(small_config)
        path = fresh.dataset().save(tmp_path / "dataset.json")
        replay = ExperimentService(small_config)

        replay.load_dataset(path)

        first = fresh.evaluate(ClusteringMethod.BASELINE)
        second = replay.evaluate(ClusteringMethod.BASELINE)
        assert [r.se_sum for r in first.records] == [r.se_sum for r in second.records]

    def test_shape_mismatch_rejected(self, tmp_path, small_config):
        path = ExperimentService(small_config).dataset().save(tmp_path / "dataset.json")
        other = small_config.model_copy(
            update={"scenario": small_config.scenario.model_copy(update={"num_ues": 5})}
        )

        with pytest.raises(ParameterError):
            ExperimentService(other).load_dataset(path)

    def test_beta_dump(self, tmp_path, small_config):
        service = ExperimentService(small_config)

        service.export_connection_map(
            1, ClusteringMethod.BASELINE, tmp_path / "map.txt", beta_path=tmp_path / "beta.csv"
        )

        dataset = service.dataset()
        expected = dataset.test_locations[1].realization(dataset.scenario, 2.0).beta
        frame = pd.read_csv(tmp_path / "beta.csv", index_col="ap")
        np.testing.assert_allclose(frame.to_numpy(), expected, rtol=1e-12)


@pytest.mark.slow
class TestReducedAcceptance:
    """Desk-scale training run; deselected by default."""

    def test_training_improves_the_objective(self, tmp_path):
        config = load_experiment_config(
            Path(__file__).resolve().parents[2] / "configs" / "reduced.toml"
        )
        service = ExperimentService(config)

        _, history, final_path = service.train(tmp_path)
        checkpoint = load_checkpoint(final_path)
        policy = service.evaluate(ClusteringMethod.POLICY, checkpoint=checkpoint)

        master_only = service.evaluate(ClusteringMethod.MASTER_ONLY)
        baseline = service.evaluate(ClusteringMethod.BASELINE)

        assert history[-1].mean_reward >= history[0].mean_reward + 0.5
        assert np.isfinite(policy.mean_se_sum)
        assert policy.mean_objective > master_only.mean_objective
        # tau_p = K in this config, so the heuristic connects every pair
        assert config.physical.tau_p == config.scenario.num_ues
        assert policy.mean_connections < baseline.mean_connections
        assert policy.mean_se_sum >= 0.85 * baseline.mean_se_sum
