# corrpus_site/settings.py
import os
from pathlib import Path

from dotenv import dotenv_values

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Key-value config file (dotenv syntax). Environment variables win over it,
# command-line flags win over both.
CORRPUS_CONFIG_FILE = Path(os.environ.get('CORRPUS_CONFIG_FILE', BASE_DIR / 'corrpus.env'))
_file_config = dotenv_values(CORRPUS_CONFIG_FILE) if CORRPUS_CONFIG_FILE.exists() else {}


def _setting(key, default=None):
    value = os.environ.get(key)
    if value is None:
        value = _file_config.get(key)
    return default if value in (None, '') else value


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = _setting('DJANGO_SECRET_KEY', 'django-insecure-corrpus-local-development-key')

DEBUG = _setting('DJANGO_DEBUG', 'false').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'corrpus.apps.CorrpusConfig',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            # Prompts are plain text; quotes must reach the model unescaped.
            'autoescape': False,
        },
    },
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization
#   https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# --- CORRPUS PIPELINE ---
CORRPUS = {
    'COMPLETION_BASE_URL': _setting('CORRPUS_COMPLETION_BASE_URL', 'https://api.openai.com/v1'),
    'COMPLETION_API_KEY': _setting('CORRPUS_COMPLETION_API_KEY'),
    'MODEL': _setting('CORRPUS_MODEL', 'code-davinci-002'),
    'SCORER_URL': _setting('CORRPUS_SCORER_URL'),
    'SCORER_API_KEY': _setting('CORRPUS_SCORER_API_KEY'),
    'MAX_IN_FLIGHT': int(_setting('CORRPUS_MAX_IN_FLIGHT', 4)),
    'MAX_OUTPUT_TOKENS': int(_setting('CORRPUS_MAX_OUTPUT_TOKENS', 1024)),
    'TOP_P': float(_setting('CORRPUS_TOP_P', 0.95)),
    'REQUEST_TIMEOUT': float(_setting('CORRPUS_REQUEST_TIMEOUT', 60)),
    'MAX_RETRIES': int(_setting('CORRPUS_MAX_RETRIES', 3)),
    'ASSETS_DIR': Path(_setting('CORRPUS_ASSETS_DIR', BASE_DIR / 'corrpus' / 'assets')),
    'CASSETTE_PATH': Path(_setting('CORRPUS_CASSETTE_PATH', BASE_DIR / 'cassettes' / 'completions.jsonl')),
    'BABI_DATA': Path(_setting('CORRPUS_BABI_DATA', BASE_DIR / 'data' / 'qa2_two-supporting-facts_test.txt')),
    'RE3_DATA': Path(_setting('CORRPUS_RE3_DATA', BASE_DIR / 'data' / 're3_detection.json')),
    'OUTPUT_DIR': Path(_setting('CORRPUS_OUTPUT_DIR', BASE_DIR / 'runs')),
}
# --- /CORRPUS PIPELINE ---


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'corrpus': {
            'handlers': ['console'],
            'level': _setting('CORRPUS_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
        'httpx': {
            'handlers': ['console'],
            'level': 'WARNING',
        },
    },
}
