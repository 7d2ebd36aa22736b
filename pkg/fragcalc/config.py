"""
Toolkit configuration management using Pydantic settings.
"""
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    """Toolkit settings with environment variable support."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False)

    # Evaluation Configuration
    eval_node_budget: int = 100_000_000  # naive expansion limit for finite models

    # Oracle Configuration
    witness_height: int = 2
    max_witness_candidates: int = 200_000

    # Naming Configuration
    fresh_marker: str = "'"  # reserved namespace: x'0, x'1, ...

    # Corpus Configuration
    corpus_seed: int = 20240117
    corpus_size: int = 100

    # Logging Configuration
    log_level: str = "WARNING"
    log_format: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    @field_validator("eval_node_budget", "max_witness_candidates", "corpus_size")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("witness_height")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value


@lru_cache()
def get_settings() -> Settings:
    """Get cached toolkit settings."""
    return Settings()
