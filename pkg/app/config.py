from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings read from the environment (SCANPILOT_* variables).

    Logging and Sentry read SCANPILOT_LOG, SCANPILOT_LOG_FILE, SCANPILOT_ENV and
    SCANPILOT_SENTRY_DSN directly so they work before settings are loaded.
    """

    # Outputs
    output_dir: str = "runs"
    persist_frames: bool = True

    model_config = SettingsConfigDict(
        env_prefix="SCANPILOT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()
