from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class LabSettings(BaseSettings):
    """Process-wide defaults, overridable through HIGGSLAB_* environment variables or .env"""

    model_config = SettingsConfigDict(env_prefix="HIGGSLAB_", env_file=".env", extra="ignore")

    output_dir: str = "runs"
    log_level: str = "INFO"

    # Relative tolerance of the surface/tangency constraints
    constraint_tol: float = 1e-10

    # Singularity floors, relative to R0 on curved surfaces
    x0_floor_rel: float = 1e-9
    r_floor_rel: float = 1e-9
    flat_r_floor: float = 1e-12

    # Denominator floor for relative gradient errors
    gradient_floor: float = 1e-3


settings = LabSettings()
