"""Evaluation and training report models."""

from enum import Enum

import numpy as np
from pydantic import BaseModel, Field


class ClusteringMethod(str, Enum):
    """Ways of building the AP-UE service sets."""

    BASELINE = "baseline"
    POLICY = "policy"
    MASTER_ONLY = "master_only"
    FULL = "full"


class LocationRecord(BaseModel):
    location: int
    method: ClusteringMethod
    se_sum: float
    se_per_ue: list[float]
    connections: int
    objective: float


class EmpiricalCDF(BaseModel):
    """Sorted sample values with their cumulative probabilities."""

    values: list[float]
    probabilities: list[float]

    @classmethod
    def from_samples(cls, samples: list[float]) -> "EmpiricalCDF":
        values = np.sort(np.asarray(samples, dtype=float))
        probabilities = np.arange(1, values.size + 1) / values.size
        return cls(values=values.tolist(), probabilities=probabilities.tolist())


class EvalReport(BaseModel):
    method: ClusteringMethod
    config_hash: str
    seed: int
    records: list[LocationRecord]
    mean_se_sum: float
    mean_connections: float
    mean_objective: float
    se_sum_cdf: EmpiricalCDF
    ue_se_cdf: EmpiricalCDF
    connections_cdf: EmpiricalCDF

    @classmethod
    def from_records(
        cls,
        method: ClusteringMethod,
        records: list[LocationRecord],
        config_hash: str,
        seed: int,
    ) -> "EvalReport":
        return cls(
            method=method,
            config_hash=config_hash,
            seed=seed,
            records=records,
            mean_se_sum=float(np.mean([r.se_sum for r in records])),
            mean_connections=float(np.mean([r.connections for r in records])),
            mean_objective=float(np.mean([r.objective for r in records])),
            se_sum_cdf=EmpiricalCDF.from_samples([r.se_sum for r in records]),
            ue_se_cdf=EmpiricalCDF.from_samples(
                [se for r in records for se in r.se_per_ue]
            ),
            connections_cdf=EmpiricalCDF.from_samples([r.connections for r in records]),
        )

    def representative_location(self) -> int:
        """Location whose SE sum is closest to the mean (lowest index on ties)."""
        gaps = [abs(r.se_sum - self.mean_se_sum) for r in self.records]
        return self.records[int(np.argmin(gaps))].location

    def summary(self) -> dict[str, float | int | str]:
        return {
            "method": self.method.value,
            "locations": len(self.records),
            "mean_se_sum": self.mean_se_sum,
            "mean_connections": self.mean_connections,
            "mean_objective": self.mean_objective,
        }


class ValidationReport(BaseModel):
    """Outcome of the Monte-Carlo estimation check and the gradient check."""

    mc_trials: int
    mc_max_relative_error: float
    mc_threshold: float = 0.02
    gradient_max_relative_error: float
    gradient_threshold: float = 1e-4
    gradient_per_tensor: dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.mc_max_relative_error < self.mc_threshold
            and self.gradient_max_relative_error <= self.gradient_threshold
        )
