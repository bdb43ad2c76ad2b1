"""Experiment orchestration: datasets, evaluation, training, validation and exports."""

import logging
from pathlib import Path
from typing import Any

import numpy as np

from app.core.exceptions import CheckpointMismatchError, ConfigError, ParameterError
from app.core.learning.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.core.learning.policy import (
    FeatureNormalizer,
    PolicyParams,
    build_features,
    forward,
    order_ues,
    sample_clusters,
    threshold_clusters,
)
from app.core.learning.training import EpochStats, gradient_check, train
from app.core.network.access import (
    PilotPlan,
    assign_pilots,
    build_pilot_plan,
    compute_gamma,
    mc_validate_estimation,
)
from app.core.network.baseline import baseline_clusters, full_clusters, master_only_clusters
from app.core.network.downlink import ClusterAssignment, evaluate_clusters
from app.models.experiment import ExperimentConfig
from app.models.reports import ClusteringMethod, EvalReport, LocationRecord, ValidationReport
from app.services.dataset import (
    TRAINING_STREAM,
    VALIDATION_STREAM,
    Dataset,
    generate_dataset,
    seed_streams,
)
from app.services.report_writer import write_connection_map, write_eval_report, write_history

logger = logging.getLogger(__name__)


class ExperimentService:
    """Service for the complete simulate / cluster / train / evaluate pipeline."""

    def __init__(self, config: ExperimentConfig):
        """Initialize the service for one experiment configuration."""
        self.config = config
        self._dataset: Dataset | None = None
        logger.info(
            f"ExperimentService initialized (seed {config.seed}, "
            f"hash {config.config_hash()[:12]})"
        )

    @property
    def provenance(self) -> dict[str, object]:
        return {"config_hash": self.config.config_hash(), "seed": self.config.seed}

    def dataset(self, test_locations: int | None = None) -> Dataset:
        """Generate (once) the dataset for this configuration, unless one was loaded."""
        if test_locations is not None:
            return generate_dataset(self.config, test_locations=test_locations)
        if self._dataset is None:
            self._dataset = generate_dataset(self.config)
        return self._dataset

    def load_dataset(self, path: Path) -> Dataset:
        """Use a saved dataset.json instead of regenerating from the seed."""
        dataset = Dataset.load(path)
        if not dataset.test_locations:
            raise ConfigError(f"dataset {path} has no test locations")
        scenario = self.config.scenario
        expected = (scenario.grid_side**2, scenario.num_ues)
        found = (dataset.scenario.num_aps, dataset.test_locations[0].drop.num_ues)
        if found != expected:
            raise ParameterError(
                f"dataset {path} has (L, K)={found}, configuration expects {expected}"
            )
        if dataset.config_hash != self.config.config_hash():
            logger.warning(
                f"Dataset {path} was generated from config {str(dataset.config_hash)[:12]}, "
                f"running with {self.config.config_hash()[:12]}"
            )
        self._dataset = dataset
        return dataset

    def _checkpoint_for(
        self, method: ClusteringMethod, checkpoint_path: Path | None, dataset: Dataset
    ) -> Checkpoint | None:
        if method is not ClusteringMethod.POLICY:
            return None
        if checkpoint_path is None:
            raise ParameterError("policy clustering needs --checkpoint")
        return load_checkpoint(checkpoint_path, expected_aps=dataset.scenario.num_aps)

    def build_clusters(
        self,
        method: ClusteringMethod,
        beta: np.ndarray,
        plan: PilotPlan,
        checkpoint: Checkpoint | None,
        dataset: Dataset,
        location: int,
    ) -> ClusterAssignment:
        num_aps = beta.shape[0]
        if method is ClusteringMethod.BASELINE:
            return baseline_clusters(beta, plan)
        if method is ClusteringMethod.MASTER_ONLY:
            return master_only_clusters(plan, num_aps)
        if method is ClusteringMethod.FULL:
            return full_clusters(plan, num_aps)
        if checkpoint is None:
            raise ParameterError("policy evaluation needs a checkpoint")
        drop = dataset.test_locations[location].drop
        features = build_features(beta, drop, checkpoint.normalizer)
        ordering = order_ues(beta, plan.masters, dataset.scenario.ap_order)
        probs = forward(checkpoint.params, ordering, features)
        return threshold_clusters(probs, plan.masters)

    def evaluate(
        self,
        method: ClusteringMethod,
        dataset: Dataset | None = None,
        checkpoint: Checkpoint | None = None,
    ) -> EvalReport:
        """
        Evaluate one clustering method on every test location.

        Each location uses its stored shadowing draw, so reports of different
        methods on the same dataset are paired.
        """
        dataset = dataset or self.dataset()
        if checkpoint is not None and checkpoint.params.num_aps != dataset.scenario.num_aps:
            raise CheckpointMismatchError(
                f"checkpoint L={checkpoint.params.num_aps} does not match "
                f"scenario L={dataset.scenario.num_aps}"
            )
        uplink = self.config.uplink()
        downlink = self.config.downlink()
        carrier = self.config.physical.carrier_ghz

        records = []
        for index, location in enumerate(dataset.test_locations):
            beta = location.realization(dataset.scenario, carrier).beta
            plan = build_pilot_plan(beta, uplink.tau_p)
            gamma = compute_gamma(beta, plan, uplink)
            clusters = self.build_clusters(method, beta, plan, checkpoint, dataset, index)
            result = evaluate_clusters(clusters, beta, gamma, plan, downlink)
            records.append(
                LocationRecord(
                    location=index,
                    method=method,
                    se_sum=result.se_sum,
                    se_per_ue=result.se.tolist(),
                    connections=result.connections,
                    objective=result.objective,
                )
            )

        report = EvalReport.from_records(
            method, records, self.config.config_hash(), self.config.seed
        )
        logger.info(
            f"{method.value}: mean SE sum {report.mean_se_sum:.3f} bit/s/Hz, "
            f"mean connections {report.mean_connections:.2f}, "
            f"mean objective {report.mean_objective:.3f}"
        )
        return report

    def evaluate_to_dir(
        self,
        method: ClusteringMethod,
        output_dir: Path,
        checkpoint_path: Path | None = None,
    ) -> tuple[EvalReport, dict[str, Path]]:
        dataset = self.dataset()
        checkpoint = self._checkpoint_for(method, checkpoint_path, dataset)
        report = self.evaluate(method, dataset, checkpoint)
        return report, write_eval_report(report, Path(output_dir))

    def representative_location(
        self, method: ClusteringMethod, checkpoint_path: Path | None = None
    ) -> int:
        """Test location whose SE sum under `method` is closest to the mean."""
        dataset = self.dataset()
        report = self.evaluate(
            method, dataset, self._checkpoint_for(method, checkpoint_path, dataset)
        )
        location = report.representative_location()
        logger.info(
            f"Representative {method.value} location: {location} "
            f"(SE sum {report.records[location].se_sum:.3f}, mean {report.mean_se_sum:.3f})"
        )
        return location

    def train(self, output_dir: Path) -> tuple[Checkpoint, list[EpochStats], Path]:
        """Train the policy, writing periodic checkpoints and the history CSV."""
        output_dir = Path(output_dir)
        dataset = self.dataset()
        tcfg = self.config.training
        rng = seed_streams(self.config.seed)[TRAINING_STREAM]
        lineage = {
            "master_seed": self.config.seed,
            "stream": TRAINING_STREAM,
            "config_hash": self.config.config_hash(),
        }

        def on_epoch_end(
            stats: EpochStats, params: PolicyParams, normalizer: FeatureNormalizer
        ) -> None:
            if (stats.epoch + 1) % tcfg.checkpoint_every == 0:
                save_checkpoint(
                    output_dir / f"checkpoint_epoch{stats.epoch + 1:04d}.npz",
                    Checkpoint(params, normalizer, {**lineage, "epoch": stats.epoch + 1}),
                )

        result = train(
            dataset.scenario,
            dataset.train_drops,
            self.config.uplink(),
            self.config.downlink(),
            self.config.shadow_model(),
            self.config.physical.carrier_ghz,
            tcfg,
            rng,
            on_epoch_end=on_epoch_end,
        )
        checkpoint = Checkpoint(
            result.params, result.normalizer, {**lineage, "epoch": tcfg.epochs}
        )
        final_path = save_checkpoint(output_dir / "checkpoint_final.npz", checkpoint)
        write_history(result.history, output_dir / "history.csv", self.provenance)
        return checkpoint, result.history, final_path

    def export_connection_map(
        self,
        location: int,
        method: ClusteringMethod,
        path: Path,
        checkpoint_path: Path | None = None,
        beta_path: Path | None = None,
    ) -> tuple[Path, ClusterAssignment]:
        """
        Write the AP/UE positions, active links and pilot plan of one test location.

        With `beta_path` the location's linear β matrix is dumped alongside.
        """
        dataset = self.dataset()
        if not 0 <= location < len(dataset.test_locations):
            raise ParameterError(
                f"location {location} out of range 0..{len(dataset.test_locations) - 1}"
            )
        checkpoint = self._checkpoint_for(method, checkpoint_path, dataset)

        test = dataset.test_locations[location]
        realization = test.realization(dataset.scenario, self.config.physical.carrier_ghz)
        beta = realization.beta
        plan = build_pilot_plan(beta, self.config.physical.tau_p)
        clusters = self.build_clusters(method, beta, plan, checkpoint, dataset, location)
        provenance = {**self.provenance, "method": method.value, "location": location}
        written = write_connection_map(
            Path(path), dataset.scenario, test.drop, clusters, provenance, plan
        )
        if beta_path is not None:
            Path(beta_path).parent.mkdir(parents=True, exist_ok=True)
            realization.to_csv(Path(beta_path))
            logger.info(f"Wrote β of location {location} to {beta_path}")
        return written, clusters

    def validate(self, trials: int = 100_000) -> ValidationReport:
        """
        Monte-Carlo MMSE check on a 2-AP / 2-UE shared-pilot instance and a
        finite-difference gradient check on a q=8, L=3, K=2 policy.
        """
        rng = seed_streams(self.config.seed)[VALIDATION_STREAM]
        uplink = self.config.uplink()

        beta = np.array([[1e-9, 4e-10], [3e-10, 2e-9]])
        masters = np.array([0, 1])
        plan = PilotPlan(masters=masters, pilots=np.array([0, 0]), tau_p=uplink.tau_p)
        estimation = mc_validate_estimation(
            beta, plan, uplink, self.config.scenario.antennas, trials, rng
        )

        num_aps, num_ues = 3, 2
        params = PolicyParams.initialize(8, num_aps, rng, fc_hidden=(16, 8))
        small_beta = 10.0 ** (rng.uniform(-11.0, -8.0, size=(num_aps, num_ues)))
        small_plan = assign_pilots(small_beta, np.argmax(small_beta, axis=0), 1)
        features = rng.standard_normal((num_ues, num_aps + 2))
        ordering = order_ues(small_beta, small_plan.masters, np.arange(num_aps))
        probs = forward(params, ordering, features)
        clusters, _ = sample_clusters(probs, small_plan.masters, rng)
        gradients = gradient_check(params, ordering, features, clusters, small_plan.masters)

        report = ValidationReport(
            mc_trials=trials,
            mc_max_relative_error=estimation.max_relative_error,
            gradient_max_relative_error=gradients.max_relative_error,
            gradient_per_tensor=gradients.per_tensor,
        )
        logger.info(
            f"Validation: MC max rel. error {report.mc_max_relative_error:.4f}, "
            f"gradient max rel. error {report.gradient_max_relative_error:.2e}, "
            f"passed={report.passed}"
        )
        return report

    def describe_dataset(self) -> dict[str, Any]:
        dataset = self.dataset()
        return {
            "seed": dataset.seed,
            "num_aps": dataset.scenario.num_aps,
            "num_ues": dataset.test_locations[0].drop.num_ues,
            "train_drops": len(dataset.train_drops),
            "test_locations": len(dataset.test_locations),
            "config_hash": self.config.config_hash(),
            "dataset_config_hash": dataset.config_hash,
        }
