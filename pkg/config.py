import os
from dotenv import load_dotenv

# Load environment variables from the .env file
load_dotenv()

class Config:
    # --- Reproducibility ---
    # Used when no --seed flag is given on the command line.
    SEED: int = int(os.getenv("BIASLAB_SEED", 0))

    # --- Logging ---
    LOG_LEVEL: str = os.getenv("BIASLAB_LOG_LEVEL", "INFO").upper()

    # --- Concurrency ---
    # Upper bound on replications / bootstrap chunks running at the same time.
    WORKERS: int = int(os.getenv("BIASLAB_WORKERS", 4))

    # --- Diagnostics ---
    BOOTSTRAP_RESAMPLES: int = int(os.getenv("BIASLAB_BOOTSTRAP_RESAMPLES", 1000))
    SENSITIVITY_K: float = float(os.getenv("BIASLAB_SENSITIVITY_K", 4.0))
    T_NEGLIGIBLE: float = float(os.getenv("BIASLAB_T_NEGLIGIBLE", 2.0))
    MIN_DIAGNOSTIC_ROWS: int = 30

    # --- Monte Carlo oracle ---
    TOLERANCE_SE: float = float(os.getenv("BIASLAB_TOLERANCE_SE", 4.0))
    TOLERANCE_ABS: float = float(os.getenv("BIASLAB_TOLERANCE_ABS", 0.02))
    BIN_HALF_WIDTH: float = float(os.getenv("BIASLAB_BIN_HALF_WIDTH", 0.05))
    SELECTION_BAND: float = float(os.getenv("BIASLAB_SELECTION_BAND", 0.05))

    # --- Numerical guards ---
    CONDITION_LIMIT: float = 1e12
    STANDARDIZATION_TOL: float = 1e-9
    RECIPROCAL_GUARD: float = 1e-6
    TAXONOMY_NODE_LIMIT: int = 20
    PATH_LIMIT: int = 10000  # open paths reported before truncating
    TRACING_NODE_LIMIT: int = 8

config = Config()
