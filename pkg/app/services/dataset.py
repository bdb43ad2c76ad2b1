"""Seeded train/test location sets."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from app.core.exceptions import ConfigError, ParameterError
from app.core.network.channel import LargeScaleRealization, large_scale, sample_shadow, shadow_covariance
from app.core.network.scenario import Scenario, UEDrop, place_aps, sample_ue_drop
from app.models.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

# Independent child streams of the master seed, in this order.
SCENARIO_STREAM, TRAIN_STREAM, TEST_STREAM, TRAINING_STREAM, VALIDATION_STREAM = range(5)


def seed_streams(master_seed: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(master_seed).spawn(5)
    return [np.random.default_rng(child) for child in children]


@dataclass(frozen=True)
class TestLocation:
    """A test drop with the single shadowing draw every method is evaluated on."""

    drop: UEDrop
    shadow_db: np.ndarray

    def realization(self, scenario: Scenario, carrier_ghz: float) -> LargeScaleRealization:
        return large_scale(scenario, self.drop, self.shadow_db, carrier_ghz)


class DatasetFile(BaseModel):
    """Layout of a saved dataset.json."""

    seed: int
    config_hash: str | None = None
    scenario: dict[str, Any]
    train_drops: list[dict[str, Any]]
    test_locations: list[dict[str, Any]]


@dataclass(frozen=True)
class Dataset:
    scenario: Scenario
    train_drops: list[UEDrop]
    test_locations: list[TestLocation]
    seed: int
    config_hash: str | None = None

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "scenario": self.scenario.to_record(),
            "train_drops": [d.to_record() for d in self.train_drops],
            "test_locations": [
                {"drop": t.drop.to_record(), "shadow_db": t.shadow_db.tolist()}
                for t in self.test_locations
            ],
        }

    @classmethod
    def from_record(cls, record: dict) -> "Dataset":
        return cls(
            scenario=Scenario.from_record(record["scenario"]),
            train_drops=[UEDrop.from_record(d) for d in record["train_drops"]],
            test_locations=[
                TestLocation(
                    drop=UEDrop.from_record(t["drop"]),
                    shadow_db=np.asarray(t["shadow_db"], dtype=float),
                )
                for t in record["test_locations"]
            ],
            seed=int(record["seed"]),
            config_hash=record.get("config_hash"),
        )

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        stored = DatasetFile.model_validate(self.to_record())
        path.write_text(stored.model_dump_json(), encoding="utf-8")
        logger.info(f"Saved dataset ({len(self.test_locations)} test locations) to {path}")
        return path

    @classmethod
    def load(cls, path: Path | str) -> "Dataset":
        """Read a dataset.json written by `save`."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError as e:
            raise ConfigError(f"dataset file not found: {path}") from e
        except OSError as e:
            raise ConfigError(f"cannot read dataset file {path}: {e}") from e
        try:
            dataset = cls.from_record(DatasetFile.model_validate_json(text).model_dump())
        except (ValidationError, KeyError) as e:
            raise ConfigError(f"invalid dataset file {path}: {e}") from e
        logger.info(
            f"Loaded dataset {path}: L={dataset.scenario.num_aps}, "
            f"{len(dataset.train_drops)} train drops, "
            f"{len(dataset.test_locations)} test locations"
        )
        return dataset


def build_scenario(cfg: ExperimentConfig, rng: np.random.Generator) -> Scenario:
    s = cfg.scenario
    return place_aps(
        grid_side=s.grid_side,
        area_side=s.area_side_m,
        jitter_fraction=s.jitter_fraction,
        rng=rng,
        height_diff=cfg.physical.height_diff_m,
        antennas=s.antennas,
        seed=cfg.seed,
    )


def generate_dataset(
    cfg: ExperimentConfig,
    train_locations: int | None = None,
    test_locations: int | None = None,
) -> Dataset:
    """
    Build the AP layout, the training drops and the test locations.

    Train and test come from separate child streams of the master seed, so
    changing one set's size never shifts the other.
    """
    n_train = cfg.dataset.train_locations if train_locations is None else train_locations
    n_test = cfg.dataset.test_locations if test_locations is None else test_locations
    if n_train < 1 or n_test < 1:
        raise ParameterError(f"dataset sizes must be >= 1, got ({n_train}, {n_test})")

    streams = seed_streams(cfg.seed)
    scenario = build_scenario(cfg, streams[SCENARIO_STREAM])
    area = cfg.scenario.area_side_m
    num_ues = cfg.scenario.num_ues

    train_rng = streams[TRAIN_STREAM]
    train_drops = [sample_ue_drop(num_ues, area, train_rng) for _ in range(n_train)]

    test_rng = streams[TEST_STREAM]
    shadow_model = cfg.shadow_model()
    test_set = []
    for _ in range(n_test):
        drop = sample_ue_drop(num_ues, area, test_rng)
        shadow = sample_shadow(
            shadow_covariance(drop, shadow_model), scenario.num_aps, test_rng
        )
        test_set.append(TestLocation(drop=drop, shadow_db=shadow))

    logger.info(
        f"Generated dataset: L={scenario.num_aps}, K={num_ues}, "
        f"{n_train} train drops, {n_test} test locations (seed {cfg.seed})"
    )
    return Dataset(
        scenario=scenario,
        train_drops=train_drops,
        test_locations=test_set,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
    )
