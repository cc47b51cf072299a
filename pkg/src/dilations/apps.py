from django.apps import AppConfig


class DilationsConfig(AppConfig):
    name = 'dilations'
