"""
Toolkit settings management using Pydantic Settings.

Defaults are validated in one place. Values come from code or CLI flags only;
environment variables and dotenv files are not consulted.
"""

from functools import lru_cache
from typing import Literal, Tuple, Type

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit-wide defaults."""

    model_config = SettingsConfigDict(case_sensitive=False, extra="ignore")

    # Logging Settings
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="WARNING", description="Logging level"
    )
    log_format: Literal["json", "text"] = Field(default="text", description="Log format")

    # Reproducibility
    seed: int = Field(default=42, ge=0, description="Seed for synthetic data and perturbations")

    # Field Defaults
    default_variant: Literal["loggpis", "reverting"] = Field(
        default="reverting", description="Transform used when none is requested"
    )
    noise_variance: float = Field(default=1e-4, ge=0.0, description="Occupancy noise variance")
    length_scale_factor: float = Field(
        default=4.0, gt=0.0, description="Length scale as a multiple of median point spacing"
    )
    uncertainty_beta: float = Field(
        default=1.0, ge=0.0, description="Posterior std multiples in the uncertainty proxy"
    )

    # Performance Settings
    query_chunk_size: int = Field(default=4096, ge=1, description="Query rows per block")
    max_grid_cells: int = Field(default=100_000_000, ge=1, description="Mesher grid cell cap")

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_level(cls, v):
        """Accept lower-case level names."""
        return v.upper() if isinstance(v, str) else v

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


@lru_cache
def get_settings() -> Settings:
    """
    Get cached toolkit settings.

    Returns:
        Settings: Settings instance.

    Note:
        Settings are cached. To reload, clear the cache: get_settings.cache_clear()
    """
    return Settings()
