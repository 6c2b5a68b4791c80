import os
import sys
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

# Determine the base directory of the project
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ENV_FILE_PATH = os.path.join(BASE_DIR, ".env")


class Settings(BaseSettings):
    """Application configuration settings loaded from environment variables and .env file."""

    # --- Logging Configuration ---
    LOG_LEVEL: str = Field("INFO", description="Root log level.")
    LOG_TO_FILE: bool = Field(False, description="Enable logging to a file.")
    LOG_FILE_PATH: str = Field(
        "logs/mob_eval.log", description="Path to the log file."
    )

    # --- Execution ---
    DEFAULT_JOBS: int = Field(
        1, ge=1, description="Worker threads for per-image aggregation."
    )

    # --- NMS defaults ---
    NMS_IOU: float = Field(
        0.5, ge=0.0, le=1.0, description="IoU threshold above which NMS suppresses."
    )
    NMS_SCORE_THRESHOLD: float = Field(
        0.25, ge=0.0, le=1.0, description="Calibrated score threshold for NMS."
    )

    # --- MOB defaults ---
    MOB_IOU: float = Field(
        0.0, ge=0.0, lt=1.0, description="IoU above which MOB links two boxes."
    )
    MOB_SCORE_THRESHOLD: float = Field(
        0.05, ge=0.0, le=1.0, description="Calibrated score threshold for MOB."
    )
    MOB_MAX_ITERATIONS: int = Field(3, ge=1, description="Maximum MOB passes.")
    MOB_MAX_INFLATION: float = Field(
        100.0, gt=0.0, description="Merged box area bound relative to largest input."
    )

    # --- Evaluation ---
    SWEEP_THRESHOLDS: str = Field(
        "0.05:0.50:0.05", description="Score threshold grid as lo:hi:step."
    )
    AVG_OBJECT_WIDTH_PX: float = Field(
        60.0, gt=0.0, description="Average object pixel width used for bounds."
    )
    GROUND_RESOLUTION_M: float = Field(
        0.02, gt=0.0, description="Meters of ground per image pixel."
    )

    model_config = SettingsConfigDict(
        env_file=ENV_FILE_PATH,  # Load from .env file
        env_file_encoding="utf-8",
        extra="ignore",  # Ignore extra fields from environment/env file
    )


# Instantiate the settings
try:
    settings = Settings()
except ValidationError as e:
    print(f"Error loading configuration: {e}", file=sys.stderr)
    sys.exit(2)
