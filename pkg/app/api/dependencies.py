from fastapi import Depends

from app.config import Settings, get_settings
from app.services.experiment_service import ExperimentService


def get_experiment_service(settings: Settings = Depends(get_settings)) -> ExperimentService:
    """Experiment service bound to the process settings."""
    return ExperimentService(settings)
