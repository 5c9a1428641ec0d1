import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-frontflow-local-key')

DEBUG = os.environ.get('DJANGO_DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third-party apps
    'rest_framework',

    # Local apps
    'frontflow',
]

# Database
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('FRONTFLOW_DB_PATH', BASE_DIR / 'db.sqlite3'),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Solver settings
FRONTFLOW_THREADS = int(os.environ.get('FRONTFLOW_THREADS', os.cpu_count() or 1))
FRONTFLOW_MAX_NODES = int(os.environ.get('FRONTFLOW_MAX_NODES', 2 ** 24))
FRONTFLOW_OUTPUT_DIR = Path(os.environ.get('FRONTFLOW_OUTPUT_DIR', BASE_DIR / 'output'))
FRONTFLOW_DEFAULT_SEED = 42
FRONTFLOW_CSV_MAX_NODES = 10_000

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'frontflow': {
            'level': os.environ.get('FRONTFLOW_LOG_LEVEL', 'INFO'),
        },
    },
}
