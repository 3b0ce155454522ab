"""Core configuration"""
from pathlib import Path
from typing import Literal

from orjson import JSONDecodeError, loads
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import DataValidationError
from app.core.settings import BASE_DIR


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Data ingestion
    WET_THRESHOLD_MM: float = 0.0
    CSV_DELIMITER: str = ","
    MISSING_VALUE_TOKEN: str = ""
    MISSING_POLICY: Literal["reject", "split"] = "reject"

    # Analysis defaults
    TREND_M: int = 3000
    SCAN_WINDOW: int = 360
    SCAN_ALPHA: float = 0.01
    FIT_METRIC: Literal["l1", "l2", "linf"] = "l1"
    FIT_STARTS: int = 8
    FIT_TOLERANCE: float = 1e-8
    QUAD_REL_TOL: float = 1e-10

    # Parallelism
    WORKERS: int = 1
    MC_SHARDS: int = 8

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False
    LOG_TO_FILE: bool = True
    LOG_DIR: Path = BASE_DIR.parent / "logs"

    # FastAPI Configuration
    API_HOST: str = "0.0.0.0"
    API_PORT: int = 8000
    DEBUG: bool = False

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="UTF-8",
        extra="ignore"
    )

    def with_overrides(self, path: str | Path | None = None, **overrides) -> "Settings":
        """
        Copy settings with values from a JSON config file and explicit overrides

        Args:
            path: JSON file with UPPER_CASE keys (optional)
            **overrides: Values that win over the file

        Returns:
            New validated Settings instance

        Raises:
            DataValidationError: Unreadable file, invalid JSON or not a JSON object
        """
        data = self.model_dump()

        if path is not None:
            try:
                file_data = loads(Path(path).read_bytes())
            except OSError as e:
                raise DataValidationError(f"cannot read config file {path}: {e.strerror or e}", details={"path": str(path)})
            except JSONDecodeError as e:
                raise DataValidationError(f"config file {path} is not valid JSON: {e}", details={"path": str(path)})
            if not isinstance(file_data, dict):
                raise DataValidationError(f"config file {path} must contain a JSON object", details={"path": str(path)})
            data.update({str(k).upper(): v for k, v in file_data.items()})

        data.update({k: v for k, v in overrides.items() if v is not None})
        return Settings.model_validate(data)


settings = Settings()
