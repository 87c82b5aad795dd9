"""
Django settings for the dipsim project.

dipsim has no web surface and no database: the project exists to host the
simulation apps, their management commands and the test runner.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

from pathlib import Path

from decouple import config
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
load_dotenv(BASE_DIR / '.env')


SECRET_KEY = config('SECRET_KEY', default='dipsim-insecure-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'symmetry',
    'measures',
    'dirichlet',
    'posterior',
    'convergence',
    'lab',
]

# No models anywhere; Django falls back to its dummy backend.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/6.0/topics/logging/
# Everything goes to stderr; stdout carries command summaries only.

DIP_LOG_LEVEL = config('DIP_LOG_LEVEL', default='WARNING')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': DIP_LOG_LEVEL,
    },
}


# Simulation defaults
# These are deliberately not read from the environment: a run is fully
# described by its command line (or --config file) and its seed.

DIP_STICK_BREAKING_EPS = 1e-6
DIP_FINITE_N_ATOMS = 2000
DIP_LIMIT_K_SYM = 360

# Monte Carlo fallback for base measures without a closed-form box probability
DIP_MC_FALLBACK_SAMPLES = 10**6
DIP_MC_FALLBACK_SEED = 20240611

# Spot check of base-measure invariance performed by posterior.fitting.fit
DIP_INVARIANCE_CHECK_BOXES = 64
DIP_INVARIANCE_CHECK_SAMPLES = 20000
DIP_INVARIANCE_CHECK_SEED = 7
DIP_INVARIANCE_Z_THRESHOLD = 3.0
DIP_INVARIANCE_MAX_ELEMENTS = 4

# Exhaustive group-axiom verification is quadratic in the group order
DIP_GROUP_VERIFY_MAX_ORDER = 512

DIP_MOMENT_Z_THRESHOLD = 4.0
DIP_BOUNDARY_BUFFER = 1e-9

# Path invariance check: random boxes per run and the largest tolerated gap
DIP_PATH_CHECK_BOXES = 200
DIP_INVARIANCE_TOLERANCE = 1e-9

DIP_REPLICA_WORKERS = 1
DIP_SWEEP_DEFAULT_K = 16
