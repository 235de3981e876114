# Test wiring for running the Django test suite under plain pytest: mirrors
# what `manage.py test` does (settings, app registry, throwaway test database).
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'corrpus_site.settings')
django.setup()

_runner = None
_old_config = None


def pytest_sessionstart(session):
    global _runner, _old_config
    from django.test.runner import DiscoverRunner
    from django.test.utils import setup_test_environment

    setup_test_environment()
    _runner = DiscoverRunner(verbosity=0, interactive=False)
    _old_config = _runner.setup_databases()


def pytest_sessionfinish(session, exitstatus):
    from django.test.utils import teardown_test_environment

    if _runner is not None:
        _runner.teardown_databases(_old_config)
    teardown_test_environment()
