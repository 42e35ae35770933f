import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel

# ----------------------------
# Environment Variables
# ----------------------------
load_dotenv()  # Load variables from .env file

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseModel):
    solver: str = "clarabel"
    workers: int = 1
    log_level: str = "INFO"
    output_dir: str = "artifacts"
    host: str = "0.0.0.0"
    port: int = 8000


def get_settings() -> Settings:
    """Read runtime settings from the environment (and .env) at call time."""
    return Settings(
        solver=os.getenv("GRASPSCP_SOLVER", "clarabel"),
        workers=int(os.getenv("GRASPSCP_WORKERS", "1")),
        log_level=os.getenv("GRASPSCP_LOG_LEVEL", "INFO"),
        output_dir=os.getenv("GRASPSCP_OUTPUT_DIR", "artifacts"),
        host=os.getenv("GRASPSCP_HOST", "0.0.0.0"),
        port=int(os.getenv("GRASPSCP_PORT", "8000")),
    )


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)
