"""
App configuration for vqse app.
"""
from django.apps import AppConfig


class VqseAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'vqse'
