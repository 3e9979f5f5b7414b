from pathlib import Path
from functools import lru_cache
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables and `.env`."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="WAVEREC_",
        case_sensitive=False,
        extra="ignore",
    )

    # Core Settings
    app_name: str = "Wave Reconstruction Lab"
    environment: str = "development"
    debug: bool = False
    host: str = "0.0.0.0"
    port: int = 8000

    # Experiments
    output_dir: Path = Path("results")
    sweep_workers: int = Field(default=1, ge=1)

    # Logging
    log_level: str = "INFO"
    log_format: str = "console"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
