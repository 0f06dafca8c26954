from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Sampling
    control_period: float = 1e-3
    sim_step: float = 5e-5

    # Storage paths
    storage_dir: str = "storage"
    runs_dir: str = "storage/runs"
    jobs_file: str = "storage/scenario_jobs.json"

    # Logging
    log_level: str = "INFO"

    # Runs
    record_solve_time: bool = True
    default_seed: int = 1

    # Server
    host: str = "0.0.0.0"
    port: int = 8000

    class Config:
        env_file = ".env"
        env_prefix = "DEEPC_"
        case_sensitive = False


settings = Settings()
