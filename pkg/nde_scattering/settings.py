"""
Django settings for the nde_scattering project.
"""

import os
from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='nde-scattering-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'scattering',
]

# No ORM models; Django falls back to its dummy backend.
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Scattering configuration
SCATTERING_OUTPUT_DIR = Path(config('SCATTERING_OUTPUT_DIR', default=str(BASE_DIR / 'output')))
SCATTERING_CONFIG_FILE = Path(config('SCATTERING_CONFIG_FILE', default=str(BASE_DIR / 'scattering.toml')))
SCATTERING_TORCH_THREADS = config('SCATTERING_TORCH_THREADS', default=1, cast=int)
SCATTERING_LOG_LEVEL = config('SCATTERING_LOG_LEVEL', default='INFO')

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'scattering.log',
            'formatter': 'verbose',
        },
        'console': {
            'level': 'INFO',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'WARNING',
            'propagate': False,
        },
        'scattering': {
            'handlers': ['console', 'file'],
            'level': SCATTERING_LOG_LEVEL,
            'propagate': False,
        },
        'matplotlib': {
            'handlers': ['file'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}

# Create logs directory if it doesn't exist
os.makedirs(BASE_DIR / 'logs', exist_ok=True)
