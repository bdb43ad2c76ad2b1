"""Experiment configuration models."""

import hashlib
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.exceptions import ConfigError
from app.core.learning.training import TrainConfig
from app.core.network.access import UplinkConfig
from app.core.network.channel import ShadowModel
from app.core.network.downlink import DownlinkConfig

logger = logging.getLogger(__name__)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


class PhysicalConfig(BaseModel):
    """Radio parameters (default setup)."""

    bandwidth_hz: float = Field(default=20e6, gt=0)  # metadata only, SE is per Hz
    carrier_ghz: float = Field(default=2.0, gt=0)
    tau_c: int = Field(default=200, ge=1)
    tau_p: int = Field(default=10, ge=1)
    tau_u: int = Field(default=0, ge=0)
    noise_dbm: float = -94.0
    downlink_noise_dbm: float | None = None
    uplink_power_mw: float = Field(default=100.0, gt=0)
    max_downlink_power_mw: float = Field(default=200.0, gt=0)
    height_diff_m: float = Field(default=10.0, ge=0)
    penalty: float = Field(default=0.04, ge=0)

    @model_validator(mode="after")
    def check_block_split(self) -> "PhysicalConfig":
        if self.tau_p + self.tau_u >= self.tau_c:
            raise ValueError(
                f"tau_p + tau_u must be below tau_c ({self.tau_p}+{self.tau_u} >= {self.tau_c})"
            )
        return self

    @property
    def sigma_ul2(self) -> float:
        return dbm_to_mw(self.noise_dbm)

    @property
    def sigma_dl2(self) -> float:
        noise = self.noise_dbm if self.downlink_noise_dbm is None else self.downlink_noise_dbm
        return dbm_to_mw(noise)


class ScenarioConfig(BaseModel):
    grid_side: int = Field(default=5, ge=1)
    area_side_m: float = Field(default=700.0, gt=0)
    jitter_fraction: float = Field(default=0.5, ge=0, le=1)
    antennas: int = Field(default=4, ge=1)
    num_ues: int = Field(default=10, ge=1)
    sigma_sf_db: float = Field(default=4.0, ge=0)
    delta_sf_m: float = Field(default=9.0, gt=0)


class DatasetConfig(BaseModel):
    train_locations: int = Field(default=1000, ge=1)
    test_locations: int = Field(default=200, ge=1)


class ExperimentConfig(BaseModel):
    """Complete, replayable description of one experiment."""

    seed: int = 2024
    physical: PhysicalConfig = Field(default_factory=PhysicalConfig)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)

    def uplink(self) -> UplinkConfig:
        p = self.physical
        return UplinkConfig(
            eta=p.uplink_power_mw, sigma_ul2=p.sigma_ul2, tau_p=p.tau_p, tau_c=p.tau_c
        )

    def downlink(self) -> DownlinkConfig:
        p = self.physical
        return DownlinkConfig(
            rho_max=p.max_downlink_power_mw,
            sigma_dl2=p.sigma_dl2,
            antennas=self.scenario.antennas,
            tau_c=p.tau_c,
            tau_p=p.tau_p,
            tau_u=p.tau_u,
            penalty=p.penalty,
        )

    def shadow_model(self) -> ShadowModel:
        return ShadowModel(
            sigma_sf=self.scenario.sigma_sf_db, delta_sf=self.scenario.delta_sf_m
        )

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else self.model_copy(update={"seed": seed})


def load_experiment_config(path: Path | str) -> ExperimentConfig:
    """Read a TOML experiment file; sections mirror ExperimentConfig."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}: {e}") from e
    logger.info(f"Loaded experiment config {path} (hash {config.config_hash()[:12]})")
    return config
