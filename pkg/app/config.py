"""Configuration management for the Finsler geodesic engine."""
import os

import dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
dotenv.load_dotenv()

_ROOT = os.path.dirname(os.path.dirname(__file__))


class Settings(BaseSettings):
    """Engine settings.

    Every field can be overridden with a ``FINSLER_``-prefixed environment
    variable or a ``.env`` file entry.
    """

    model_config = SettingsConfigDict(env_prefix="FINSLER_", extra="ignore")

    app_title: str = "Finsler Geodesics"
    app_description: str = "Extended geodesic fields of C0-Finsler structures"
    app_version: str = "1.0.0"
    environment: str = "development"
    log_level: str = "INFO"

    # Tolerances
    closed_form_tol: float = 1e-8
    iterative_tol: float = 1e-4
    domain_margin: float = 1e-9

    # Integration
    step: float = 1e-3
    event_xtol: float = 1e-10
    drift_tol: float = 1e-6
    face_tol: float = 1e-12
    probe_factor: float = 1e-3

    # One-dimensional boundary searches (arc-composite norms)
    angle_search_xtol: float = 1e-10
    angle_search_samples: int = 360

    # Strong convexity bisection
    strong_convexity_c_min: float = 1e-6
    strong_convexity_c_max: float = 1.0
    strong_convexity_bisections: int = 40

    # Grid oracle
    oracle_resolution: int = 301
    oracle_stencil: int = 16
    oracle_min_resolution_warning: int = 16
    certify_gap_low: float = -1e-3
    certify_gap_high: float = 0.03

    random_seed: int = 20240524
    max_workers: int = 4

    # Paths
    templates_path: str = os.path.join(_ROOT, "templates")
    data_path: str = os.path.join(_ROOT, "data")
    output_path: str = os.path.join(_ROOT, "output")

    def __init__(self, **kwargs):
        super().__init__(**kwargs)

        # Fail fast on tolerances that would make the engine loop or divide by zero
        positive = (
            "closed_form_tol", "iterative_tol", "domain_margin", "step",
            "event_xtol", "drift_tol", "face_tol", "probe_factor", "angle_search_xtol",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.strong_convexity_c_min >= self.strong_convexity_c_max:
            raise ValueError("strong_convexity_c_min must be below strong_convexity_c_max")

    @property
    def probe_epsilon(self) -> float:
        """One-sided probe used to pick the next control after a switch."""
        return 10.0 * self.step * self.probe_factor


# Global settings instance
settings = Settings()
