"""Process configuration using Pydantic Settings."""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    # Environment
    ENVIRONMENT: str = "development"
    DEBUG: bool = False

    # Project
    PROJECT_NAME: str = "MPJR adhesive contact solver"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "console"  # json or console

    # Output
    OUTPUT_FLOAT_FORMAT: str = ".17g"

    class Config:
        env_file = ".env"
        case_sensitive = True

    def format_float(self, value: float) -> str:
        """Render a float with the configured output precision."""
        return format(float(value), self.OUTPUT_FLOAT_FORMAT)


# Global settings instance
settings = Settings()
