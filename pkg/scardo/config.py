from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="SCARDO_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    APP_NAME: str = Field(default="SCARDO engine")
    DEBUG: bool = Field(default=False)

    OUTPUT_DIR: str = Field(default="output")
    MAX_WORKERS: int = Field(default=1)

    RK4_STEP: float = Field(default=1e-3)
    ODE_SAMPLE_INTERVAL: float = Field(default=0.01)
    EQUILIBRIUM_TOLERANCE: float = Field(default=1e-10)
    LSODA_RTOL: float = Field(default=1e-10)
    LSODA_ATOL: float = Field(default=1e-12)

    STOCHASTIC_TOLERANCE: float = Field(default=1e-9)
    DENSE_TENSOR_LIMIT: int = Field(default=64)
    RNG_BLOCK: int = Field(default=8192)

    @property
    def parallel_replicas(self) -> bool:
        """Return True when replicas should fan out to worker processes."""
        return self.MAX_WORKERS > 1


settings = Settings()
