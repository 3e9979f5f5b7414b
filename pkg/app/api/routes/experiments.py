from fastapi import APIRouter, Depends, HTTPException

from app.api.dependencies import get_experiment_service
from app.core.wave_core import grid_coordinates
from app.exceptions import ReconstructionError
from app.models.schemas import ExperimentConfig, ExperimentResponse, PhantomResponse, PhantomSpec
from app.services.experiment_service import ExperimentService
from app.services.phantom_service import generate_phantom
from app.utils.logger import get_logger

logger = get_logger(__name__)
router = APIRouter(tags=["Experiments"])


@router.post("/experiments/run", response_model=ExperimentResponse)
def run_experiment(
    config: ExperimentConfig,
    write_artifacts: bool = False,
    service: ExperimentService = Depends(get_experiment_service),
) -> ExperimentResponse:
    """Run one reconstruction; artifacts are written only on request."""
    try:
        outcome = service.run_experiment(config, write_artifacts=write_artifacts)
        result = outcome.result
        return ExperimentResponse(
            method=result.method,
            settings=outcome.cell.settings,
            rms_percent=result.rms_percent,
            iterations_used=result.iterations_used,
            per_iteration_rms=result.per_iteration_rms,
            converged=result.converged,
            diverged=result.diverged,
            estimate=result.estimate.tolist(),
            artifacts=[str(path) for path in outcome.artifacts],
        )
    except ReconstructionError as e:
        logger.error("experiment request failed", error=str(e))
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error("experiment request crashed", error=str(e))
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/phantoms", response_model=PhantomResponse)
def create_phantom(spec: PhantomSpec) -> PhantomResponse:
    """Evaluate a phantom on its grid."""
    try:
        grid = spec.grid()
        phantom = generate_phantom(spec, grid)
        return PhantomResponse(
            label=phantom.label,
            x=grid_coordinates(grid).tolist(),
            values=phantom.values.tolist(),
        )
    except ReconstructionError as e:
        logger.error("phantom request failed", error=str(e))
        raise HTTPException(status_code=422, detail=str(e))
