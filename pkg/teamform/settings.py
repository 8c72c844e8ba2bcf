"""
Django settings for the teamform project.

Only the pieces the solver toolkit needs are configured: the `tfc` app, a
database for run provenance, logging and the TFC_* solver knobs.
"""

import os
from pathlib import Path

import dj_database_url
from dotenv import load_dotenv

from tfc.constants import (
    DEFAULT_ENUMERATION_LIMIT,
    DEFAULT_EXACT_NODE_BUDGET,
    DEFAULT_FEAS_TOL,
    DEFAULT_INT_TOL,
    DEFAULT_LP_ENGINE,
    DEFAULT_LP_ITERATION_FACTOR,
    DEFAULT_SEED,
    DEFAULT_SIMPLEX_MAX_CELLS,
)

# load .env for local runs
load_dotenv()


def _env_bool(key: str, default: bool = False) -> bool:
    value = os.environ.get(key)
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


def _env_int(key: str, default: int) -> int:
    try:
        return int(os.environ.get(key, default))
    except (TypeError, ValueError):
        return default


def _env_float(key: str, default: float) -> float:
    try:
        return float(os.environ.get(key, default))
    except (TypeError, ValueError):
        return default


BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "teamform-local-only")

DEBUG = _env_bool("DJANGO_DEBUG", True)

ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    'tfc',
]


# Database
# ----------------------------------
DATABASE_URL = os.environ.get("DATABASE_URL")
if DATABASE_URL:
    DATABASES = {
        "default": dj_database_url.config(default=DATABASE_URL, conn_max_age=600),
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True
TIME_ZONE = os.environ.get("DJANGO_TIME_ZONE", "UTC")


# Solver knobs
# ----------------------------------
TFC_FEAS_TOL = _env_float("TFC_FEAS_TOL", DEFAULT_FEAS_TOL)
TFC_INT_TOL = _env_float("TFC_INT_TOL", DEFAULT_INT_TOL)
TFC_LP_ENGINE = os.environ.get("TFC_LP_ENGINE", DEFAULT_LP_ENGINE)
TFC_SIMPLEX_MAX_CELLS = _env_int("TFC_SIMPLEX_MAX_CELLS", DEFAULT_SIMPLEX_MAX_CELLS)
TFC_LP_ITERATION_FACTOR = _env_int("TFC_LP_ITERATION_FACTOR", DEFAULT_LP_ITERATION_FACTOR)
TFC_EXACT_NODE_BUDGET = _env_int("TFC_EXACT_NODE_BUDGET", DEFAULT_EXACT_NODE_BUDGET)
TFC_ENUMERATION_LIMIT = _env_int("TFC_ENUMERATION_LIMIT", DEFAULT_ENUMERATION_LIMIT)
TFC_DEFAULT_SEED = _env_int("TFC_DEFAULT_SEED", DEFAULT_SEED)
TFC_RUN_SLOW_TESTS = _env_bool("TFC_RUN_SLOW_TESTS", False)


# Logging
# ----------------------------------
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "tfc": {
            "handlers": ["console"],
            "level": os.environ.get("TFC_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
