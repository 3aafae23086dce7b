"""Runtime configuration read from the environment."""
import os

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings:
    """Process-wide settings for the fetmosaic tools."""

    def __init__(self):
        threads = int(os.getenv("FETMOSAIC_THREADS", "0"))
        if threads < 0:
            raise ValueError(
                "FETMOSAIC_THREADS must be >= 0 (0 selects the CPU count)."
            )
        self.threads: int = threads or (os.cpu_count() or 1)

        self.log_level: str = os.getenv("FETMOSAIC_LOG_LEVEL", "INFO").upper()
        if self.log_level not in LOG_LEVELS:
            raise ValueError(
                f"FETMOSAIC_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}; got {self.log_level!r}."
            )

        # Largest mosaic canvas side, in pixels
        self.canvas_max: int = int(os.getenv("FETMOSAIC_CANVAS_MAX", "8192"))
        if self.canvas_max < 1:
            raise ValueError("FETMOSAIC_CANVAS_MAX must be a positive pixel count.")


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get or create the settings singleton."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Forget the cached settings so the next call re-reads the environment."""
    global _settings
    _settings = None
