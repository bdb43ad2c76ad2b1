"""ASGI entry point: the simulation API behind uvicorn."""

import logging
from contextlib import asynccontextmanager
from typing import Any, AsyncGenerator

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.api.v1.api import api_router
from app.config import settings

logger = logging.getLogger(__name__)


def setup_logging(level: str | None = None) -> None:
    """Configure root logging; `level` overrides LOG_LEVEL (CLI --log-level)."""
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper()),
        format=settings.log_format,
    )


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncGenerator[None, None]:
    """Log the experiment defaults the API serves, and flag a missing default config."""
    setup_logging()
    logger.info(f"Starting {settings.app_name} v{settings.app_version}")
    logger.info(
        f"Results under {settings.output_dir}, "
        f"at most {settings.max_api_test_locations} test locations per evaluation"
    )
    if not settings.default_config.exists():
        logger.warning(
            f"Default experiment config {settings.default_config} not found; "
            "the CLI needs --config"
        )

    yield

    logger.info(f"Stopping {settings.app_name}")


def create_application() -> FastAPI:
    app = FastAPI(
        title=settings.app_name,
        version=settings.app_version,
        description="Cell-free massive MIMO downlink simulation and AP clustering",
        docs_url=settings.docs_url,
        redoc_url=settings.redoc_url,
        lifespan=lifespan,
    )

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"] if settings.debug else [],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.include_router(api_router, prefix=settings.api_v1_prefix)

    return app


app = create_application()


@app.get("/")
async def root() -> dict[str, Any]:
    """Service banner with the simulation routes."""
    prefix = settings.api_v1_prefix
    return {
        "message": f"Welcome to {settings.app_name}",
        "version": settings.app_version,
        "status": "running",
        "endpoints": [
            f"{prefix}/health",
            f"{prefix}/simulation/default-config",
            f"{prefix}/simulation/evaluate",
            f"{prefix}/simulation/path-loss",
        ],
    }
