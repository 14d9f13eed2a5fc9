"""Configuration settings for the CES network toolkit."""
from pathlib import Path
from typing import List, Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables."""

    # Output
    output_dir: str = "./out"

    # Randomized procedures (modularity restarts, Monte Carlo, synth)
    seed: int = 20180101
    modularity_restarts: int = 20
    workers: int = 1

    # Ingest
    unknown_term_policy: Literal["skip", "strict"] = "skip"

    # Wavelet defaults (Morlet)
    wavelet_omega0: float = 6.0
    wavelet_s0: float = 2.0
    wavelet_dj: float = 0.25
    significance_level: float = 0.95
    coherence_mc_draws: int = 300

    # HOSVD: unfoldings with rows >= gram_ratio * cols go through the Gram path
    gram_ratio: float = 4.0

    # Stringency
    stringency_countries: str = "GB,US,CA,AU,NZ,IE"

    # Logging & tracing
    log_level: str = "INFO"
    otel_exporter_endpoint: str = ""
    otel_service_name: str = "ces-network"
    trace_console: bool = False

    class Config:
        # Look for .env file in the project root
        env_file = str(Path(__file__).parent.parent / ".env")
        env_file_encoding = "utf-8"
        extra = "ignore"

    @field_validator("significance_level")
    @classmethod
    def _check_level(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("significance_level must lie in (0, 1)")
        return value

    @property
    def country_list(self) -> List[str]:
        return [c.strip().upper() for c in self.stringency_countries.split(",") if c.strip()]

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
