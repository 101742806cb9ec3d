"""Configuration management for ehmm."""

from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    # Logging
    log_level: str = "INFO"
    debug: bool = False

    # Output
    output_dir: str = "runs"
    csv_float_format: str = "%.17g"

    # Largest K**n the brute-force path oracle will enumerate
    max_enumeration: int = 1_000_000

    # Worker threads for multi-chain runs (None lets the executor decide)
    max_workers: Optional[int] = None

    model_config = SettingsConfigDict(
        env_prefix="EHMM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


def get_settings() -> Settings:
    """Get application settings."""
    return Settings()


# Global settings instance
settings = get_settings()
