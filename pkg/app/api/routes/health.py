from datetime import datetime

from fastapi import APIRouter

from app import __version__
from app.models.schemas import HealthCheckResponse

router = APIRouter(tags=["Health"])


def _healthy() -> HealthCheckResponse:
    return HealthCheckResponse(status="healthy", version=__version__, timestamp=datetime.now())


@router.get("/", response_model=HealthCheckResponse)
async def root():
    """Root endpoint - health check."""
    return _healthy()


@router.get("/health", response_model=HealthCheckResponse)
async def health_check():
    """Health check endpoint."""
    return _healthy()
