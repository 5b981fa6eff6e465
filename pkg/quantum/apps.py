"""
App configuration for quantum app.
"""
from django.apps import AppConfig


class QuantumConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'quantum'
    verbose_name = 'Dense quantum states, XXZ chain and layered ansatz'
