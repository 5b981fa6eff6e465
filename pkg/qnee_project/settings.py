"""
Django settings for qnee_project project.

The project has no web surface and no database: Django provides settings,
logging, the app registry and the management commands that drive the
estimators.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'qnee-local-only-key')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'rest_framework',
    'quantum',
    'estimator',
    'vqse',
    'experiments',
]

# Results are written as CSV/JSON files, never to a database
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework (serializers only)
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}


# Output and run defaults
QNEE_OUTPUT_DIR = Path(os.getenv('QNEE_OUTPUT_DIR', BASE_DIR / 'runs'))
QNEE_SEED = int(os.getenv('QNEE_SEED', 1234))
QNEE_WORKERS = int(os.getenv('QNEE_WORKERS', 1))

# Default layer of the sweep configuration (CLI > env > config file > these)
QNEE_DEFAULTS = {
    'L': 8,
    'delta': 0.05,
    'lambda_grid': [
        0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.7, 1.75, 1.8, 1.9,
        2.0, 2.1, 2.25, 2.5, 2.75, 3.0,
    ],
    'subsystems': [3, 4],
    'method': 'qnee',
    'seed': QNEE_SEED,
    'workers': QNEE_WORKERS,
    'output_dir': str(QNEE_OUTPUT_DIR),
    # N_l per subsystem size: 8 layers for three qubits, 10 for four
    'layers_by_subsystem': {'2': 2, '3': 8, '4': 10},
    'qnee': {
        'eta_q': 0.01,
        'fd_step': 0.01,
        'fd_scheme': 'forward',
        'n_outer': 200,
        'n_shots': 30000,
        'n_trials': 5,
        'noise_free': False,
        'exact_weights': False,
        'init': 'random',
        'embed_dim': 64,
        'hidden_width': 256,
        # path to a .qnw snapshot from an earlier run
        'warm_start': None,
    },
    'nn_initial': {
        'learning_rate': 1e-5,
        'weight_decay': 5e-5,
        'n_iter': 10000,
        'batch_size': None,
        'test_eval_period': 10,
        'alpha': None,
    },
    'nn_step': {
        'learning_rate': 1e-5,
        'weight_decay': 5e-5,
        'n_iter': 100,
        'batch_size': None,
        'test_eval_period': 10,
        'alpha': None,
    },
    'vqse': {
        'r1': 0.2,
        'delta_r': 0.01,
        'm': None,
        't_update_period': 25,
        'learning_rate': 0.05,
        'fd_step': 0.01,
        'n_iter': 200,
        'n_shots': 30000,
        'n_trials': 5,
        'noise_free': False,
        'init': 'random',
    },
}

# Environment overrides, applied above the config file when set
QNEE_ENV_OVERRIDES = {
    'QNEE_SEED': 'seed',
    'QNEE_SHOTS': 'shots',
    'QNEE_TRIALS': 'trials',
    'QNEE_WORKERS': 'workers',
    'QNEE_N_OUTER': 'n_outer',
    'QNEE_OUTPUT_DIR': 'output_dir',
    'QNEE_METHOD': 'method',
    'QNEE_LAMBDA_GRID': 'lambda_grid',
    'QNEE_SUBSYSTEM': 'subsystems',
}

QNEE_ORACLE_INSTANCES = int(os.getenv('QNEE_ORACLE_INSTANCES', 200))

LOG_LEVEL = os.getenv('QNEE_LOG_LEVEL', 'DEBUG' if DEBUG else 'INFO')
LOGS_DIR = Path(os.getenv('QNEE_LOG_DIR', BASE_DIR / 'logs'))

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {message}',
            'style': '{',
        },
        'run': {
            'format': '{asctime} {levelname} RUN {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
        'file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': str(LOGS_DIR / 'qnee.log'),
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
        'run_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': str(LOGS_DIR / 'runs.log'),
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 5,
            'formatter': 'run',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'runs': {
            'handlers': ['run_file', 'console'],
            'level': 'INFO',
            'propagate': False,
        },
        'quantum': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'estimator': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'vqse': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'experiments': {
            'handlers': ['console', 'file'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

# Create logs directory
LOGS_DIR.mkdir(parents=True, exist_ok=True)
