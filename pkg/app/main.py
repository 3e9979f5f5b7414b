from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.api.routes import experiments, health
from app.config import Settings, get_settings
from app.utils.logger import get_logger, setup_logging

setup_logging()
logger = get_logger(__name__)


def create_app(settings: Optional[Settings] = None) -> FastAPI:
    """Build the HTTP service around the experiment harness."""
    settings = settings or get_settings()

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        logger.info(
            "service starting",
            environment=settings.environment,
            debug=settings.debug,
            output_dir=str(settings.output_dir),
        )
        yield
        logger.info("service stopping")

    service = FastAPI(
        title=settings.app_name,
        description="Reconstruction of 1-D wave initial data by time reversal, nudging and Kalman filtering",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
        lifespan=lifespan,
    )
    service.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=False,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    service.include_router(health.router)
    service.include_router(experiments.router, prefix="/api")
    return service


app = create_app()
