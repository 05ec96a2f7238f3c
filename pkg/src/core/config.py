import os
import configparser
from pathlib import Path
import logging.config
from dotenv import load_dotenv

# Load environment variables from a .env file if it exists
# This is useful for local development.
load_dotenv()

# --- Core Application Paths ---
BASE_DIR = Path(__file__).resolve().parent.parent.parent
CONFIG_DIR = BASE_DIR / "config"
CONFIG_FILE = CONFIG_DIR / "cssc.ini"

# --- Application Metadata ---
APP_NAME = "CSSC Configurator"
APP_VERSION = "1.0.0"

# --- Configuration Loading ---
config = configparser.ConfigParser()
config.read(CONFIG_FILE)


def _setting(section: str, key: str, fallback, cast=str):
    """Environment variable first (CSSC_<KEY>), then config file, then the default."""
    raw = os.getenv(f"CSSC_{key.upper()}", config.get(section, key, fallback=None))
    if raw is None:
        return fallback
    return cast(raw)


OUTPUT_DIR = Path(_setting("paths", "output_dir", "cssc-output"))

# --- Scenario Defaults ---
# A five-minute cutoff, 3 GB memory and a two-day budget on four cores.
DEFAULT_CUTOFF_SECONDS = _setting("scenario", "cutoff_time", 300.0, float)
DEFAULT_MEMORY_LIMIT_MB = _setting("scenario", "memory_limit_mb", 3072, int)
DEFAULT_WALLCLOCK_BUDGET = _setting("scenario", "wallclock_limit", 172_800.0, float)
DEFAULT_CORES = _setting("scenario", "cores", 4, int)
DEFAULT_PAR_K = _setting("scenario", "par_k", 10, int)

# --- Runner Configuration ---
ENFORCEMENT_GRACE_SECONDS = _setting("runner", "grace_seconds", 2.0, float)
RUNNER_POLL_INTERVAL = _setting("runner", "poll_interval", 0.05, float)
SYNTHETIC_RUNTIME_GRANULARITY = _setting("runner", "runtime_granularity", 0.1, float)

# --- Parameter Space Configuration ---
DEFAULT_GRID_SIZE = _setting("space", "grid_size", 7, int)
REJECTION_BUDGET = _setting("space", "rejection_budget", 10_000, int)
MAX_ENUMERATION_SIZE = _setting("space", "max_enumeration", 1_000_000, int)

# --- Adaptive Capping ---
BOUND_MULTIPLIER = _setting("capping", "bound_multiplier", 2.0, float)
CAP_EPSILON = _setting("capping", "epsilon", 0.01, float)

# --- ParamILS Defaults ---
ILS_PERTURBATION_STRENGTH = _setting("paramils", "perturbation_strength", 3, int)
ILS_RESTART_PROBABILITY = _setting("paramils", "restart_probability", 0.01, float)
ILS_INITIAL_RANDOM = _setting("paramils", "initial_random", 10, int)
ILS_N_BASIC = _setting("paramils", "n_basic", 100, int)
ILS_MAX_PASSES = _setting("paramils", "max_passes", 10, int)

# --- GGA Defaults ---
GGA_UNITS = _setting("gga", "units", 4, int)
GGA_POPULATION_SIZE = _setting("gga", "population_size", 50, int)
GGA_GENERATION_TARGET = _setting("gga", "generation_target", 75, int)
GGA_GENERATION_MAX = _setting("gga", "generation_max", 100, int)
GGA_N_START = _setting("gga", "n_start", 4, int)
GGA_MUTATION_RATE = _setting("gga", "mutation_rate", 0.05, float)
GGA_MAX_AGE = _setting("gga", "max_age", 3, int)

# --- SMAC Defaults ---
SMAC_NUM_TREES = _setting("smac", "num_trees", 40, int)
SMAC_MAX_FEATURES = _setting("smac", "max_features", 5 / 6, float)
SMAC_MIN_SAMPLES_LEAF = _setting("smac", "min_samples_leaf", 3, int)
SMAC_CHALLENGERS = _setting("smac", "challengers_per_iteration", 10, int)
SMAC_RANDOM_SAMPLES = _setting("smac", "random_samples", 1000, int)
SMAC_LOCAL_SEARCH_STARTS = _setting("smac", "local_search_starts", 10, int)

# --- Structured Logging Configuration ---
LOG_LEVEL = _setting("logging", "level", "INFO").upper()

LOGGING_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "json": {
            "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
            "format": "%(asctime)s %(name)s %(levelname)s %(message)s %(pathname)s %(lineno)d",
        },
    },
    "handlers": {
        "default": {
            "class": "logging.StreamHandler",
            "formatter": "json",
            "level": "DEBUG",
            "stream": "ext://sys.stderr",
        },
    },
    "root": {
        "handlers": ["default"],
        "level": LOG_LEVEL,
    },
    "loggers": {
        # joblib logs every dispatched batch
        "joblib": {"level": "WARNING"},
    },
}


def configure_logging(level: str | None = None):
    """Applies the structured logging configuration, optionally overriding the level."""
    logging_config = dict(LOGGING_CONFIG)
    if level:
        logging_config["root"] = {**LOGGING_CONFIG["root"], "level": level.upper()}
    logging.config.dictConfig(logging_config)
