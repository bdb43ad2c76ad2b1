"""Service registry for shared instances."""

from app.models.experiment import ExperimentConfig
from app.services.experiment_service import ExperimentService

# Create singleton instances
_experiment_service = None


def get_experiment_service() -> ExperimentService:
    """Get shared experiment service instance (default setup)."""
    global _experiment_service
    if _experiment_service is None:
        _experiment_service = ExperimentService(ExperimentConfig())
    return _experiment_service
