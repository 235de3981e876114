from django.apps import AppConfig


class CorrpusConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'corrpus'
    verbose_name = 'CoRRPUS story understanding'
