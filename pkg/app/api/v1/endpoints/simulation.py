"""Simulation API endpoints."""

import logging
from typing import Any

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from app.config import settings
from app.core.exceptions import SimulationError
from app.core.network.channel import path_loss_db
from app.models.experiment import ExperimentConfig
from app.models.reports import ClusteringMethod, EmpiricalCDF
from app.services import get_experiment_service
from app.services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)

router = APIRouter()


class EvaluationRequest(BaseModel):
    """Request model for a clustering evaluation run."""
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    method: ClusteringMethod = ClusteringMethod.BASELINE
    test_locations: int | None = Field(default=None, ge=1)


class EvaluationResponse(BaseModel):
    """Aggregate results of an evaluation run."""
    summary: dict[str, Any]
    config_hash: str
    se_sum_cdf: EmpiricalCDF
    connections_cdf: EmpiricalCDF
    representative_location: int


class PathLossRequest(BaseModel):
    distance_m: float
    carrier_ghz: float = 2.0


@router.get("/default-config", response_model=ExperimentConfig)
async def get_default_config() -> ExperimentConfig:
    """Default experiment configuration."""
    return get_experiment_service().config


@router.post("/evaluate", response_model=EvaluationResponse)
def evaluate(request: EvaluationRequest) -> EvaluationResponse:
    """
    Evaluate a reference clustering method on freshly generated test locations.

    Policy evaluation needs a checkpoint file and is only available from the CLI.
    """
    if request.method is ClusteringMethod.POLICY:
        raise HTTPException(
            status_code=400,
            detail="Policy evaluation requires a checkpoint; use the CLI 'eval' command",
        )
    n_test = request.test_locations or request.config.dataset.test_locations
    if n_test > settings.max_api_test_locations:
        raise HTTPException(
            status_code=400,
            detail=f"At most {settings.max_api_test_locations} test locations per request",
        )
    try:
        service = ExperimentService(request.config)
        dataset = service.dataset(test_locations=n_test)
        report = service.evaluate(request.method, dataset)
        return EvaluationResponse(
            summary=report.summary(),
            config_hash=report.config_hash,
            se_sum_cdf=report.se_sum_cdf,
            connections_cdf=report.connections_cdf,
            representative_location=report.representative_location(),
        )
    except SimulationError as e:
        logger.warning(f"Evaluation rejected: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Evaluation error: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/path-loss")
async def compute_path_loss(request: PathLossRequest) -> dict[str, float]:
    """3GPP microcell path loss for one distance."""
    try:
        loss = path_loss_db(request.distance_m, request.carrier_ghz)
    except SimulationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {
        "distance_m": request.distance_m,
        "carrier_ghz": request.carrier_ghz,
        "path_loss_db": loss,
    }
