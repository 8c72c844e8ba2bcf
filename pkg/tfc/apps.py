from django.apps import AppConfig


class TfcConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'tfc'
    verbose_name = 'Team formation amidst conflicts'
